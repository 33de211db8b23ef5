#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vareg/corpus/types.hpp"
#include "vareg/losses.hpp"
#include "vareg/model/head.hpp"
#include "vareg/train/optimizer.hpp"

namespace vareg::train {

struct TrainConfig {
  int batch_size = 16;
  int epochs = 10;
  double learning_rate = 6e-6;
  double warmup_ratio = 0.1;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  losses::LossConfig loss;
  corpus::Fold fold_to_train = corpus::Fold::A;
  std::string checkpoint_id = "desk-distilled-base";
  // 0 disables micro-batch gradient accumulation. Only instance-mean
  // losses (mse, rl) decompose over micro batches; CCCL-containing
  // kinds reject accumulation.
  int micro_batch_size = 0;
  double grad_clip = 0.0;  // 0 disables clipping
  double hard_sigmoid_slope = 0.2;

  void validate() const;
};

struct TrainingExample {
  std::string instance_id;
  std::vector<int> token_ids;
  double gold_v = 0.0;
  double gold_a = 0.0;
};

// Owns the model being fine-tuned: encoder weights, regression head and
// (for adaptive robust losses) the latent alpha scalar, all updated by
// one AdamW instance. Exposed so tests can drive single batches and
// inspect gradients directly.
class FineTuner {
 public:
  explicit FineTuner(const TrainConfig& cfg);
  FineTuner(const FineTuner&) = delete;
  FineTuner& operator=(const FineTuner&) = delete;

  struct BatchOutcome {
    losses::LossValue loss;
    int fallback_events = 0;
    bool finite = true;
  };

  // Computes loss and gradients for one batch into the internal grad
  // buffers (zeroed on entry). micro_batch_size 0 processes the batch
  // whole; otherwise slices of that size accumulate an equivalent
  // gradient (instance-mean losses only).
  BatchOutcome process_batch(std::span<const TrainingExample> batch,
                             int micro_batch_size);
  void apply_update(double lr);

  double current_alpha() const;
  const model::Encoder& encoder() const { return encoder_; }
  model::RegressionHead make_head() const;
  model::Predictor make_predictor() const;

  // Flat snapshot of all gradient buffers, in optimizer-target order.
  std::vector<double> gradient_snapshot() const;

 private:
  void zero_grads();

  TrainConfig cfg_;
  model::Encoder encoder_;
  model::ParamSet extras_;       // head.weight, head.bias, loss.alpha_latent
  model::ParamSet enc_grads_;
  model::ParamSet extra_grads_;
  std::unique_ptr<AdamW> optimizer_;
};

struct TrainResult {
  std::filesystem::path artifact_dir;
  long long steps = 0;
  double first_epoch_mean_loss = 0.0;
  double final_epoch_mean_loss = 0.0;
  double final_alpha = 0.0;
  int fallback_events = 0;
  std::uint64_t truncation_events = 0;
  double seconds = 0.0;
};

// Fine-tunes on the instances carrying the requested fold label and
// writes artifact + JSONL training log under out_dir.
TrainResult train_fold(const corpus::Corpus& corpus, corpus::Fold fold,
                       const TrainConfig& cfg,
                       const std::filesystem::path& out_dir);

// Same recipe over an explicit instance subset (zero-shot training uses
// both folds of the remaining languages).
TrainResult train_instances(std::span<const corpus::AnnotatedInstance> instances,
                            const TrainConfig& cfg,
                            const std::filesystem::path& out_dir);

}  // namespace vareg::train
