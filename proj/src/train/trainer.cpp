#include "vareg/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <new>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vareg/common.hpp"
#include "vareg/kernels.hpp"
#include "vareg/train/schedule.hpp"

namespace vareg::train {

using nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (batch_size < 1) fail(Errc::config_error, "batch_size must be >= 1");
  if (epochs < 1) fail(Errc::config_error, "epochs must be >= 1");
  if (learning_rate <= 0.0) fail(Errc::config_error, "learning_rate must be > 0");
  if (warmup_ratio < 0.0 || warmup_ratio >= 1.0)
    fail(Errc::config_error, "warmup_ratio must lie in [0, 1)");
  if (micro_batch_size < 0)
    fail(Errc::config_error, "micro_batch_size must be >= 0");
  if (micro_batch_size > 0 && losses::uses_cccl(loss.kind))
    fail(Errc::accumulation_unsupported_for_batch_loss,
         "gradient accumulation is undefined for batch-level (ccc) losses");
}

namespace {

double latent_for_alpha(double alpha, const losses::LossConfig& loss) {
  // Inverse of the sigmoid parameterization, for the configured init.
  const double span = loss.alpha_hi - loss.alpha_lo;
  const double frac =
      std::clamp((alpha - loss.alpha_lo) / span, 1e-12, 1.0 - 1e-12);
  return std::log(frac / (1.0 - frac));
}

}  // namespace

FineTuner::FineTuner(const TrainConfig& cfg)
    : cfg_(cfg), encoder_(model::Encoder::from_checkpoint(cfg.checkpoint_id)) {
  cfg_.validate();
  const int hidden = encoder_.arch().hidden;
  // Small random head weights, zero bias: predictions start near the
  // center of the target square, but the encoder sees a usable gradient
  // from the first step (a zero head would block it entirely).
  auto& head_w = extras_.add("head.weight", 2, hidden, true);
  std::mt19937_64 head_rng(derive_seed(cfg_.seed, "head-init"));
  std::normal_distribution<double> head_dist(0.0,
                                             0.2 / std::sqrt(double(hidden)));
  for (auto& w : head_w.value.raw()) w = head_dist(head_rng);
  extras_.add("head.bias", 1, 2, false);
  // One extra trainable scalar shared by both affective dimensions,
  // updated by the same optimizer and schedule as the model weights.
  auto& latent = extras_.add("loss.alpha_latent", 1, 1, false);
  latent.value(0, 0) = latent_for_alpha(cfg_.loss.robust_alpha, cfg_.loss);

  enc_grads_ = encoder_.params().zeros_like();
  extra_grads_ = extras_.zeros_like();

  std::vector<model::Tensor*> targets;
  for (auto& t : encoder_.params().tensors()) targets.push_back(&t);
  for (auto& t : extras_.tensors()) targets.push_back(&t);
  AdamW::Config opt_cfg;
  opt_cfg.weight_decay = cfg_.weight_decay;
  optimizer_ = std::make_unique<AdamW>(std::move(targets), opt_cfg);
}

double FineTuner::current_alpha() const {
  return losses::alpha_from_latent(extras_.get("loss.alpha_latent").value(0, 0),
                                   cfg_.loss);
}

model::RegressionHead FineTuner::make_head() const {
  model::RegressionHead head(encoder_.arch().hidden);
  head.weight = extras_.get("head.weight").value;
  head.bias[0] = extras_.get("head.bias").value(0, 0);
  head.bias[1] = extras_.get("head.bias").value(0, 1);
  return head;
}

model::Predictor FineTuner::make_predictor() const {
  return model::Predictor(encoder_, make_head(), cfg_.hard_sigmoid_slope);
}

void FineTuner::zero_grads() {
  for (auto& t : enc_grads_.tensors()) t.value.fill(0.0);
  for (auto& t : extra_grads_.tensors()) t.value.fill(0.0);
}

std::vector<double> FineTuner::gradient_snapshot() const {
  std::vector<double> flat;
  for (const auto& t : enc_grads_.tensors())
    flat.insert(flat.end(), t.value.raw().begin(), t.value.raw().end());
  for (const auto& t : extra_grads_.tensors())
    flat.insert(flat.end(), t.value.raw().begin(), t.value.raw().end());
  return flat;
}

FineTuner::BatchOutcome FineTuner::process_batch(
    std::span<const TrainingExample> batch, int micro_batch_size) {
  if (batch.empty()) fail(Errc::empty_batch, "empty training batch");
  zero_grads();

  const int n = static_cast<int>(batch.size());
  const int micro = (micro_batch_size > 0) ? micro_batch_size : n;
  if (micro < n && losses::uses_cccl(cfg_.loss.kind))
    fail(Errc::accumulation_unsupported_for_batch_loss,
         "batch-level loss cannot be accumulated over micro batches");

  const double latent = extras_.get("loss.alpha_latent").value(0, 0);
  const int hidden = encoder_.arch().hidden;
  const Mat& head_w = extras_.get("head.weight").value;

  BatchOutcome outcome;
  double weighted_loss = 0.0, weighted_v = 0.0, weighted_a = 0.0;

  for (int begin = 0; begin < n; begin += micro) {
    const int end = std::min(begin + micro, n);
    const int m = end - begin;
    const double weight = static_cast<double>(m) / static_cast<double>(n);

    // forward
    std::vector<model::Encoder::Trace> traces(m);
    std::vector<std::array<double, 2>> logits(m);
    std::vector<double> pred_v(m), pred_a(m), gold_v(m), gold_a(m);
    try {
      const bool parallel = kernels::backend() == kernels::Backend::openmp;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
      for (int i = 0; i < m; ++i) {
        const auto& ex = batch[begin + i];
        traces[i] = encoder_.forward(ex.token_ids);
        const double* pooled = traces[i].encoded.row(0);
        std::array<double, 2> z{extras_.get("head.bias").value(0, 0),
                                extras_.get("head.bias").value(0, 1)};
        for (int d = 0; d < 2; ++d)
          for (int j = 0; j < hidden; ++j) z[d] += head_w(d, j) * pooled[j];
        logits[i] = z;
        pred_v[i] = model::hard_sigmoid(z[0], cfg_.hard_sigmoid_slope);
        pred_a[i] = model::hard_sigmoid(z[1], cfg_.hard_sigmoid_slope);
        gold_v[i] = ex.gold_v;
        gold_a[i] = ex.gold_a;
      }
      (void)parallel;
    } catch (const std::bad_alloc&) {
      fail(Errc::out_of_memory_guidance,
           "batch does not fit in memory; lower batch_size or set "
           "micro_batch_size (instance-mean losses only)");
    }

    const auto loss = losses::total_loss_with_grad(pred_v, pred_a, gold_v, gold_a,
                                                   cfg_.loss, latent);
    if (!std::isfinite(loss.value.total)) {
      outcome.finite = false;
      return outcome;
    }
    weighted_loss += loss.value.total * weight;
    weighted_v += loss.value.valence_component * weight;
    weighted_a += loss.value.arousal_component * weight;
    outcome.fallback_events += loss.fallback_events;

    // backward, serial over samples for a deterministic accumulation order
    Mat& dw = extra_grads_.get("head.weight").value;
    Mat& db = extra_grads_.get("head.bias").value;
    std::vector<double> dpooled(hidden);
    for (int i = 0; i < m; ++i) {
      const double dz0 = weight * loss.dpred_v[i] *
                         model::hard_sigmoid_grad(logits[i][0], cfg_.hard_sigmoid_slope);
      const double dz1 = weight * loss.dpred_a[i] *
                         model::hard_sigmoid_grad(logits[i][1], cfg_.hard_sigmoid_slope);
      const double* pooled = traces[i].encoded.row(0);
      for (int j = 0; j < hidden; ++j) {
        dw(0, j) += dz0 * pooled[j];
        dw(1, j) += dz1 * pooled[j];
        dpooled[j] = dz0 * head_w(0, j) + dz1 * head_w(1, j);
      }
      db(0, 0) += dz0;
      db(0, 1) += dz1;
      encoder_.backward(traces[i], dpooled, enc_grads_);
    }
    extra_grads_.get("loss.alpha_latent").value(0, 0) += weight * loss.dlatent;
  }

  outcome.loss = {weighted_loss, weighted_v, weighted_a};
  return outcome;
}

void FineTuner::apply_update(double lr) {
  if (cfg_.grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto& t : enc_grads_.tensors())
      for (double g : t.value.raw()) sq += g * g;
    for (const auto& t : extra_grads_.tensors())
      for (double g : t.value.raw()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > cfg_.grad_clip) {
      const double scale = cfg_.grad_clip / norm;
      for (auto& t : enc_grads_.tensors())
        for (double& g : t.value.raw()) g *= scale;
      for (auto& t : extra_grads_.tensors())
        for (double& g : t.value.raw()) g *= scale;
    }
  }
  std::vector<const Mat*> grads;
  for (const auto& t : enc_grads_.tensors()) grads.push_back(&t.value);
  for (const auto& t : extra_grads_.tensors()) grads.push_back(&t.value);
  optimizer_->step(grads, lr);
}

// ------------------------------------------------------------------
// Training loop

namespace {

std::vector<TrainingExample> tokenize_instances(
    std::span<const corpus::AnnotatedInstance> instances,
    const model::Encoder& encoder) {
  std::vector<TrainingExample> examples(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    examples[i].instance_id = instances[i].instance_id;
    examples[i].token_ids = encoder.tokenize_text(instances[i].text).ids;
    examples[i].gold_v = instances[i].valence;
    examples[i].gold_a = instances[i].arousal;
  }
  return examples;
}

}  // namespace

TrainResult train_instances(std::span<const corpus::AnnotatedInstance> instances,
                            const TrainConfig& cfg,
                            const std::filesystem::path& out_dir) {
  cfg.validate();
  if (instances.empty())
    fail(Errc::config_error, "no instances selected for training");
  std::filesystem::create_directories(out_dir);
  std::ofstream log(out_dir / "train_log.jsonl", std::ios::binary);
  if (!log) fail(Errc::io_error, "cannot write training log");

  const auto t_start = std::chrono::steady_clock::now();
  FineTuner tuner(cfg);
  const auto examples = tokenize_instances(instances, tuner.encoder());

  const long long n = static_cast<long long>(examples.size());
  const long long steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const long long total_steps = steps_per_epoch * cfg.epochs;
  const bool log_alpha = losses::uses_robust(cfg.loss.kind) && cfg.loss.adaptive;

  TrainResult result;
  long long step = 0;
  int fallback_events = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(cfg.seed, "epoch:" + std::to_string(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    // The epoch's batch order is part of the log so that determinism is
    // checkable byte for byte.
    {
      ordered_json line;
      line["epoch"] = epoch;
      auto ids = ordered_json::array();
      for (const auto idx : order) ids.push_back(examples[idx].instance_id);
      line["order"] = std::move(ids);
      log << line.dump() << "\n";
    }

    const auto t_epoch = std::chrono::steady_clock::now();
    double epoch_loss = 0.0;
    long long epoch_batches = 0;

    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(begin + static_cast<std::size_t>(cfg.batch_size), order.size());
      std::vector<TrainingExample> batch;
      batch.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) batch.push_back(examples[order[k]]);

      const auto outcome = tuner.process_batch(batch, cfg.micro_batch_size);
      if (!outcome.finite) {
        ordered_json line;
        line["event"] = "non_finite_loss";
        auto ids = ordered_json::array();
        for (const auto& ex : batch) ids.push_back(ex.instance_id);
        line["batch"] = std::move(ids);
        log << line.dump() << "\n";
        std::ostringstream msg;
        msg << "non-finite loss at step " << step + 1 << "; offending batch logged";
        fail(Errc::non_finite_loss, msg.str());
      }
      fallback_events += outcome.fallback_events;

      const double lr = lr_at_step(step, total_steps, cfg.learning_rate,
                                   cfg.warmup_ratio);
      tuner.apply_update(lr);
      ++step;

      ordered_json line;
      line["step"] = step;
      line["lr"] = lr;
      line["loss"] = outcome.loss.total;
      line["loss_v"] = outcome.loss.valence_component;
      line["loss_a"] = outcome.loss.arousal_component;
      if (log_alpha) line["alpha"] = tuner.current_alpha();
      log << line.dump() << "\n";

      epoch_loss += outcome.loss.total;
      ++epoch_batches;
    }

    const double mean_loss = epoch_loss / static_cast<double>(epoch_batches);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch)
            .count();
    ordered_json line;
    line["epoch"] = epoch;
    line["mean_loss"] = mean_loss;
    line["seconds"] = seconds;
    log << line.dump() << "\n";

    if (epoch == 0) result.first_epoch_mean_loss = mean_loss;
    result.final_epoch_mean_loss = mean_loss;
  }

  const auto predictor = tuner.make_predictor();
  model::save_predictor(predictor, out_dir);

  result.artifact_dir = out_dir;
  result.steps = step;
  result.final_alpha = tuner.current_alpha();
  result.fallback_events = fallback_events;
  result.truncation_events = tuner.encoder().truncation_count();
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  {
    ordered_json line;
    line["event"] = "done";
    line["steps"] = result.steps;
    line["final_mean_loss"] = result.final_epoch_mean_loss;
    line["fallback_events"] = result.fallback_events;
    line["truncation_events"] = result.truncation_events;
    line["seconds"] = result.seconds;
    log << line.dump() << "\n";
  }
  return result;
}

TrainResult train_fold(const corpus::Corpus& corpus, corpus::Fold fold,
                       const TrainConfig& cfg,
                       const std::filesystem::path& out_dir) {
  std::vector<corpus::AnnotatedInstance> selected;
  for (const auto& inst : corpus.instances)
    if (inst.fold == fold) selected.push_back(inst);
  if (selected.empty())
    fail(Errc::config_error, std::string("no instances carry fold label ") +
                                 corpus::fold_to_string(fold));
  return train_instances(selected, cfg, out_dir);
}

}  // namespace vareg::train
