#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vareg/corpus/types.hpp"
#include "vareg/losses.hpp"
#include "vareg/metrics.hpp"
#include "vareg/model/encoder.hpp"
#include "vareg/train/trainer.hpp"

namespace vareg::experiments {

enum class Protocol { grid, zero_shot, ablation };

struct ExperimentPlan {
  std::string name;
  std::filesystem::path corpus_path;
  std::vector<model::Family> families;
  std::vector<losses::Kind> loss_kinds;
  std::vector<std::string> holdout_languages;
  std::vector<std::string> excluded_datasets;
  std::uint64_t seed = 0;
  bool desk_scale = true;
  Protocol protocol = Protocol::grid;
  train::TrainConfig base_train;  // after the scale profile is applied
};

// Loads a plan file and applies the scale profile. The desk profile
// subsamples each dataset to at most 200 instances, switches to the
// desk checkpoints, trains 2 epochs at a desk-scale learning rate. The
// full profile keeps the published recipe (batch 16, 10 epochs,
// lr 6e-6, warmup 0.1).
ExperimentPlan load_plan(const std::filesystem::path& path,
                         const std::optional<std::string>& scale_override);

// ≤ max_per_dataset instances per dataset, deterministic in the seed.
corpus::Corpus subsample_corpus(const corpus::Corpus& corpus, int max_per_dataset,
                                std::uint64_t seed);

struct CellOutcome {
  std::string label;
  bool ok = false;
  std::string error;
  std::filesystem::path cell_dir;
  std::vector<metrics::PredictionRecord> records;
  metrics::MetricsReport global;
};

struct ExperimentResult {
  std::filesystem::path out_dir;
  std::vector<CellOutcome> cells;
};

// One model x loss pair under the 2-fold protocol: train on A, predict
// B, and vice versa; predictions are concatenated and scored once.
// Asserts, on every run: empty train/eval id intersection and exact
// single-coverage of the corpus.
CellOutcome run_cross_validation(const corpus::Corpus& corpus, model::Family family,
                                 losses::Kind loss_kind, const ExperimentPlan& plan,
                                 const std::filesystem::path& cell_dir);

ExperimentResult run_grid(const ExperimentPlan& plan, const corpus::Corpus& corpus,
                          const std::filesystem::path& results_root);

// Single model per holdout language, trained on both folds of every
// other language, evaluated on all holdout instances with the
// any / words / short-texts breakdown.
ExperimentResult run_zero_shot(const ExperimentPlan& plan,
                               const corpus::Corpus& corpus,
                               const std::filesystem::path& results_root);

// Cross-validation on the corpus minus the excluded datasets,
// side-by-side with a baseline on the full corpus (same seed).
ExperimentResult run_ablation(const ExperimentPlan& plan,
                              const corpus::Corpus& corpus,
                              const std::filesystem::path& results_root);

ExperimentResult run_experiment(const ExperimentPlan& plan,
                                const std::filesystem::path& results_root);

// Comparison table over grid cells; best value per metric column marked.
std::string comparison_csv(const std::vector<CellOutcome>& cells);
std::string comparison_table(const std::vector<CellOutcome>& cells);

}  // namespace vareg::experiments
