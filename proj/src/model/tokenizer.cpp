#include "vareg/model/tokenizer.hpp"

#include <cctype>

#include "vareg/common.hpp"

namespace vareg::model {

namespace {

bool is_cjk(std::uint32_t cp) {
  return (cp >= 0x4e00 && cp <= 0x9fff) ||    // CJK unified
         (cp >= 0x3400 && cp <= 0x4dbf) ||    // extension A
         (cp >= 0xf900 && cp <= 0xfaff) ||    // compatibility
         (cp >= 0x3040 && cp <= 0x30ff) ||    // hiragana + katakana
         (cp >= 0xac00 && cp <= 0xd7af);      // hangul syllables
}

// Decodes one UTF-8 codepoint; input is assumed valid (corpus adapters
// validate on ingest).
std::uint32_t decode(std::string_view s, std::size_t& i, std::size_t& len) {
  const unsigned char c = s[i];
  if (c < 0x80) {
    len = 1;
    return c;
  }
  if ((c & 0xe0) == 0xc0) len = 2;
  else if ((c & 0xf0) == 0xe0) len = 3;
  else len = 4;
  std::uint32_t cp = c & (0xff >> (len + 1));
  for (std::size_t k = 1; k < len && i + k < s.size(); ++k)
    cp = (cp << 6) | (s[i + k] & 0x3f);
  return cp;
}

}  // namespace

Tokenization tokenize(std::string_view text, int vocab_buckets,
                      int max_sequence_length) {
  if (vocab_buckets < 2 || max_sequence_length < 1)
    fail(Errc::config_error, "tokenizer needs >= 2 buckets and length >= 1");
  const std::string trimmed = trim(text);
  if (trimmed.empty())
    fail(Errc::tokenization_failure, "text is empty after whitespace trim");

  Tokenization out;
  out.ids.push_back(0);  // pooling token

  const auto flush = [&](std::string_view word) {
    if (word.empty()) return;
    const int bucket = 1 + static_cast<int>(fnv1a64(word) % (vocab_buckets - 1));
    out.ids.push_back(bucket);
  };

  std::size_t word_start = 0;
  std::size_t i = 0;
  while (i < trimmed.size()) {
    const unsigned char c = trimmed[i];
    if (c < 0x80 && std::isspace(c)) {
      flush(std::string_view(trimmed).substr(word_start, i - word_start));
      ++i;
      word_start = i;
      continue;
    }
    std::size_t len = 1;
    const std::uint32_t cp = decode(trimmed, i, len);
    if (is_cjk(cp)) {
      flush(std::string_view(trimmed).substr(word_start, i - word_start));
      flush(std::string_view(trimmed).substr(i, len));
      i += len;
      word_start = i;
    } else {
      i += len;
    }
  }
  flush(std::string_view(trimmed).substr(word_start));

  if (static_cast<int>(out.ids.size()) > max_sequence_length) {
    out.ids.resize(max_sequence_length);
    out.truncated = true;
  }
  return out;
}

}  // namespace vareg::model
