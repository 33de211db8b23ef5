#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vareg/mat.hpp"
#include "vareg/model/tokenizer.hpp"

namespace vareg::model {

enum class Family { distilled_base, base, large };
Family family_from_string(const std::string& s);
const char* family_to_string(Family f);

struct EncoderArch {
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  int ffn_hidden = 256;
  int vocab_buckets = 4096;
  int max_sequence_length = 64;
};

struct EncoderSpec {
  std::string checkpoint_id;
  int hidden_size = 0;
  int max_sequence_length = 0;
  Family family = Family::distilled_base;
};

// A named, trainable tensor. weight_decay marks whether the decoupled
// decay of the optimizer applies (biases and normalization parameters
// are excluded).
struct Tensor {
  std::string name;
  Mat value;
  bool weight_decay = true;
};

class ParamSet {
 public:
  Tensor& add(const std::string& name, int rows, int cols, bool decay);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t parameter_count() const;
  // Same names and shapes, all zeros; used as a gradient buffer.
  ParamSet zeros_like() const;

 private:
  std::vector<Tensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

// Checkpoint registry. Bundled entries synthesize deterministic initial
// weights from the checkpoint id (pre-training is out of scope for this
// toolkit); the full-scale entries describe published architectures and
// require converted weights under $VAREG_CHECKPOINT_ROOT/<id>/.
struct CheckpointInfo {
  EncoderArch arch;
  Family family = Family::distilled_base;
  bool bundled_init = false;
};

const std::map<std::string, CheckpointInfo>& checkpoint_registry();
std::string checkpoint_for_family(Family f, bool desk_scale);

// Bidirectional transformer encoder over hashed tokens. The pooled
// representation of a text is the final hidden state of the leading
// token.
class Encoder {
 public:
  // Activation caches of one forward pass, consumed by backward().
  struct LayerTrace {
    Mat x_in;
    std::vector<double> ln1_mean, ln1_rstd;
    Mat xn1;
    Mat q, k, v;
    std::vector<Mat> attn_probs;  // per head, [T x T]
    Mat heads_out;                // concatenated head outputs, pre-projection
    Mat x_mid;
    std::vector<double> ln2_mean, ln2_rstd;
    Mat xn2;
    Mat ffn_pre;
    Mat ffn_act;
  };
  struct Trace {
    std::vector<int> ids;
    std::vector<LayerTrace> layers;
    Mat x_final;
    std::vector<double> lnf_mean, lnf_rstd;
    Mat encoded;  // [T x H]; row 0 is the pooled representation
  };

  static Encoder from_checkpoint(const std::string& checkpoint_id);
  static Encoder load(const std::filesystem::path& file);
  void save(const std::filesystem::path& file) const;

  Encoder(const Encoder& other);
  Encoder& operator=(const Encoder& other);
  Encoder(Encoder&& other) noexcept;
  Encoder& operator=(Encoder&& other) noexcept;

  const EncoderArch& arch() const { return arch_; }
  const std::string& checkpoint_id() const { return checkpoint_id_; }
  Family family() const { return family_; }
  EncoderSpec spec() const;

  Tokenization tokenize_text(std::string_view text) const;

  // Inference-mode pooled states, one row per text.
  Mat encode_pool(std::span<const std::string> texts) const;
  // Truncation events observed by this encoder instance (cumulative).
  std::uint64_t truncation_count() const { return truncations_.load(); }

  Trace forward(std::span<const int> ids) const;
  // Accumulates parameter gradients for d loss / d pooled into grads.
  void backward(const Trace& trace, std::span<const double> dpooled,
                ParamSet& grads) const;

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  Encoder() = default;
  void build_params();
  void init_weights(std::uint64_t seed);

  EncoderArch arch_;
  std::string checkpoint_id_;
  Family family_ = Family::distilled_base;
  ParamSet params_;
  mutable std::atomic<std::uint64_t> truncations_{0};
};

}  // namespace vareg::model
