#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vareg {

// Every recoverable failure in the toolkit carries one of these codes.
// The CLI maps them onto its stable exit-code contract.
enum class Errc {
  // corpus
  unknown_adapter,
  checksum_mismatch,
  malformed_row,
  out_of_scale_rating,
  empty_annotation_list,
  degenerate_scale,
  rating_out_of_range,
  duplicate_instance_id,
  rank_deficient,
  // losses
  length_mismatch,
  empty_batch,
  degenerate_batch,
  non_positive_scale,
  // model
  checkpoint_unavailable,
  tokenization_failure,
  // trainer
  non_finite_loss,
  accumulation_unsupported_for_batch_loss,
  out_of_memory_guidance,
  // metrics
  empty_set,
  constant_input,
  // experiments
  empty_holdout,
  unknown_dataset_id,
  protocol_violation,
  // io / config
  io_error,
  config_error,
};

const char* errc_name(Errc code);

class ToolkitError : public std::runtime_error {
 public:
  ToolkitError(Errc code, const std::string& message);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

// FNV-1a, 64 bit. Used for content hashes, sub-seed derivation and the
// optional dataset checksum format ("fnv1a64:<16 hex digits>").
std::uint64_t fnv1a64(const void* data, std::size_t n,
                      std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64(std::string_view s);
std::string to_hex64(std::uint64_t value);

// Deterministic sub-seed derivation so that independent consumers of one
// user-facing seed do not share RNG streams.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

std::string trim(std::string_view s);
bool is_valid_utf8(std::string_view s);

// Unicode NFC normalization (ICU). Input must be valid UTF-8.
std::string nfc_normalize(const std::string& utf8);

}  // namespace vareg
