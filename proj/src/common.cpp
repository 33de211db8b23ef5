#include "vareg/common.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <array>
#include <cctype>

namespace vareg {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::unknown_adapter: return "UnknownAdapter";
    case Errc::checksum_mismatch: return "ChecksumMismatch";
    case Errc::malformed_row: return "MalformedRow";
    case Errc::out_of_scale_rating: return "OutOfScaleRating";
    case Errc::empty_annotation_list: return "EmptyAnnotationList";
    case Errc::degenerate_scale: return "DegenerateScale";
    case Errc::rating_out_of_range: return "RatingOutOfRange";
    case Errc::duplicate_instance_id: return "DuplicateInstanceId";
    case Errc::rank_deficient: return "RankDeficient";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::empty_batch: return "EmptyBatch";
    case Errc::degenerate_batch: return "DegenerateBatch";
    case Errc::non_positive_scale: return "NonPositiveScale";
    case Errc::checkpoint_unavailable: return "CheckpointUnavailable";
    case Errc::tokenization_failure: return "TokenizationFailure";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::accumulation_unsupported_for_batch_loss:
      return "AccumulationUnsupportedForBatchLoss";
    case Errc::out_of_memory_guidance: return "OutOfMemoryGuidance";
    case Errc::empty_set: return "EmptySet";
    case Errc::constant_input: return "ConstantInput";
    case Errc::empty_holdout: return "EmptyHoldout";
    case Errc::unknown_dataset_id: return "UnknownDatasetId";
    case Errc::protocol_violation: return "ProtocolViolation";
    case Errc::io_error: return "IoError";
    case Errc::config_error: return "ConfigError";
  }
  return "UnknownError";
}

ToolkitError::ToolkitError(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message),
      code_(code) {}

void fail(Errc code, const std::string& message) {
  throw ToolkitError(code, message);
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

std::string to_hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = fnv1a64(&base, sizeof base);
  return fnv1a64(tag.data(), tag.size(), h);
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    const unsigned char c = s[i];
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      len = 2;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      len = 3;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char cc = s[i + k];
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    // overlong encodings, surrogates, out of range
    static const std::array<std::uint32_t, 5> min_cp = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < min_cp[len]) return false;
    if (cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) return false;
    i += len;
  }
  return true;
}

std::string nfc_normalize(const std::string& utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) fail(Errc::io_error, "ICU NFC instance unavailable");
  icu::UnicodeString in = icu::UnicodeString::fromUTF8(utf8);
  icu::UnicodeString out = nfc->normalize(in, status);
  if (U_FAILURE(status)) fail(Errc::io_error, "NFC normalization failed");
  std::string result;
  out.toUTF8String(result);
  return result;
}

}  // namespace vareg
