#pragma once

#include <string_view>
#include <vector>

namespace vareg::model {

// Language-agnostic hashing tokenizer. Text splits on whitespace; runs
// of CJK codepoints additionally split per codepoint (those scripts do
// not delimit words with spaces). Each token maps into a fixed bucket
// space through FNV-1a, so any unicode input from any language gets a
// representation without a learned vocabulary file.
//
// Bucket 0 is reserved for the leading pooling token; word buckets live
// in [1, vocab_buckets).
struct Tokenization {
  std::vector<int> ids;  // ids[0] == 0, the pooling token
  bool truncated = false;
};

Tokenization tokenize(std::string_view text, int vocab_buckets,
                      int max_sequence_length);

}  // namespace vareg::model
