#include "vareg/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "vareg/common.hpp"
#include "vareg/corpus/corpus.hpp"
#include "vareg/model/head.hpp"

namespace vareg::experiments {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kDeskMaxPerDataset = 200;
constexpr int kDeskEpochs = 2;
constexpr int kDeskBatchSize = 8;
constexpr double kDeskLearningRate = 5e-4;

std::string cell_label(model::Family family, losses::Kind kind) {
  std::string loss = losses::kind_to_string(kind);
  for (auto& c : loss)
    if (c == '+') c = '_';
  return std::string(family_to_string(family)) + "_" + loss;
}

void apply_scale_profile(ExperimentPlan& plan) {
  if (plan.desk_scale) {
    plan.base_train.epochs = kDeskEpochs;
    plan.base_train.learning_rate = kDeskLearningRate;
    plan.base_train.warmup_ratio = 0.1;
    plan.base_train.batch_size = kDeskBatchSize;
  } else {
    plan.base_train.epochs = 10;
    plan.base_train.learning_rate = 6e-6;
    plan.base_train.warmup_ratio = 0.1;
    plan.base_train.batch_size = 16;
  }
}

// Evaluation through the persisted artifact, exercising the exported
// predictor contract on every run.
std::vector<metrics::PredictionRecord> predict_instances(
    const std::filesystem::path& artifact_dir,
    std::span<const corpus::AnnotatedInstance> instances, const char* fold_label) {
  const auto predictor = model::load_predictor(artifact_dir);
  std::vector<std::string> texts;
  texts.reserve(instances.size());
  for (const auto& inst : instances) texts.push_back(inst.text);
  const auto predictions = predictor.predict(texts);
  std::vector<metrics::PredictionRecord> records(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto& r = records[i];
    const auto& inst = instances[i];
    r.instance_id = inst.instance_id;
    r.dataset_id = inst.dataset_id;
    r.language = inst.language;
    r.granularity = corpus::granularity_to_string(inst.granularity);
    r.fold = fold_label;
    r.gold_v = inst.valence;
    r.gold_a = inst.arousal;
    r.pred_v = predictions[i].valence;
    r.pred_a = predictions[i].arousal;
  }
  return records;
}

void assert_no_leakage(std::span<const corpus::AnnotatedInstance> train_set,
                       std::span<const metrics::PredictionRecord> eval_records) {
  std::unordered_set<std::string> train_ids;
  for (const auto& inst : train_set) train_ids.insert(inst.instance_id);
  for (const auto& r : eval_records)
    if (train_ids.count(r.instance_id))
      fail(Errc::protocol_violation,
           "instance " + r.instance_id + " appears in both train and eval sets");
}

void write_reports(const std::filesystem::path& dir,
                   std::span<const metrics::PredictionRecord> records) {
  metrics::write_records_jsonl(records, dir / "records.jsonl");
  for (const auto group_by :
       {metrics::GroupBy::global, metrics::GroupBy::dataset,
        metrics::GroupBy::language, metrics::GroupBy::granularity}) {
    const auto report = metrics::evaluate_grouped(records, group_by);
    const std::string stem =
        std::string("metrics_") + metrics::group_by_to_string(group_by);
    std::ofstream j(dir / (stem + ".json"));
    j << metrics::report_to_json(report) << "\n";
    std::ofstream c(dir / (stem + ".csv"));
    c << metrics::report_to_csv(report);
  }
}

train::TrainConfig cell_train_config(const ExperimentPlan& plan,
                                     model::Family family, losses::Kind kind) {
  train::TrainConfig cfg = plan.base_train;
  cfg.seed = plan.seed;
  cfg.checkpoint_id = model::checkpoint_for_family(family, plan.desk_scale);
  cfg.loss.kind = kind;
  return cfg;
}

void write_manifest_of_record(const ExperimentPlan& plan,
                              const std::filesystem::path& out_dir) {
  ordered_json j;
  j["name"] = plan.name;
  j["corpus"] = plan.corpus_path.string();
  if (std::filesystem::exists(plan.corpus_path))
    j["corpus_fnv1a64"] = to_hex64(corpus::file_content_hash(plan.corpus_path));
  j["seed"] = plan.seed;
  j["scale"] = plan.desk_scale ? "desk" : "full";
  auto families = ordered_json::array();
  for (const auto f : plan.families) families.push_back(family_to_string(f));
  j["families"] = families;
  auto loss_kinds = ordered_json::array();
  for (const auto k : plan.loss_kinds) loss_kinds.push_back(losses::kind_to_string(k));
  j["losses"] = loss_kinds;
  j["holdout_languages"] = plan.holdout_languages;
  j["excluded_datasets"] = plan.excluded_datasets;
  j["train"] = {{"batch_size", plan.base_train.batch_size},
                {"epochs", plan.base_train.epochs},
                {"learning_rate", plan.base_train.learning_rate},
                {"warmup_ratio", plan.base_train.warmup_ratio},
                {"weight_decay", plan.base_train.weight_decay}};
  j["timestamp_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count();
#ifdef __VERSION__
  j["compiler"] = __VERSION__;
#endif
  std::ofstream out(out_dir / "manifest_of_record.json");
  out << j.dump(2) << "\n";
}

}  // namespace

corpus::Corpus subsample_corpus(const corpus::Corpus& corpus, int max_per_dataset,
                                std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_dataset;
  for (std::size_t i = 0; i < corpus.instances.size(); ++i)
    by_dataset[corpus.instances[i].dataset_id].push_back(i);
  std::set<std::size_t> keep;
  for (auto& [dataset_id, indices] : by_dataset) {
    if (static_cast<int>(indices.size()) > max_per_dataset) {
      std::mt19937_64 rng(derive_seed(seed, "subsample:" + dataset_id));
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(max_per_dataset);
    }
    keep.insert(indices.begin(), indices.end());
  }
  corpus::Corpus out;
  out.descriptors = corpus.descriptors;
  for (const auto idx : keep) out.instances.push_back(corpus.instances[idx]);
  return out;
}

CellOutcome run_cross_validation(const corpus::Corpus& corpus, model::Family family,
                                 losses::Kind loss_kind, const ExperimentPlan& plan,
                                 const std::filesystem::path& cell_dir) {
  CellOutcome outcome;
  outcome.label = cell_label(family, loss_kind);
  outcome.cell_dir = cell_dir;
  std::filesystem::create_directories(cell_dir);

  std::vector<corpus::AnnotatedInstance> fold_a, fold_b;
  for (const auto& inst : corpus.instances) {
    if (inst.fold == corpus::Fold::A) fold_a.push_back(inst);
    else if (inst.fold == corpus::Fold::B) fold_b.push_back(inst);
    else fail(Errc::protocol_violation,
              "instance " + inst.instance_id + " has no fold label");
  }
  if (fold_a.empty() || fold_b.empty())
    fail(Errc::protocol_violation, "cross-validation needs both folds populated");

  const auto cfg = cell_train_config(plan, family, loss_kind);

  // train on A, predict B; train on B, predict A
  auto cfg_a = cfg;
  cfg_a.fold_to_train = corpus::Fold::A;
  const auto run_a = train::train_instances(fold_a, cfg_a, cell_dir / "fold_A");
  auto records_b = predict_instances(run_a.artifact_dir, fold_b, "B");
  assert_no_leakage(fold_a, records_b);

  auto cfg_b = cfg;
  cfg_b.fold_to_train = corpus::Fold::B;
  const auto run_b = train::train_instances(fold_b, cfg_b, cell_dir / "fold_B");
  auto records_a = predict_instances(run_b.artifact_dir, fold_a, "A");
  assert_no_leakage(fold_b, records_a);

  // joined predictions, metrics computed once over the union
  outcome.records = std::move(records_b);
  outcome.records.insert(outcome.records.end(), records_a.begin(), records_a.end());

  if (outcome.records.size() != corpus.instances.size())
    fail(Errc::protocol_violation, "evaluation does not cover the corpus exactly");
  std::unordered_set<std::string> seen;
  for (const auto& r : outcome.records)
    if (!seen.insert(r.instance_id).second)
      fail(Errc::protocol_violation, r.instance_id + " evaluated twice");

  write_reports(cell_dir, outcome.records);
  outcome.global = metrics::evaluate_grouped(outcome.records, metrics::GroupBy::global);
  outcome.ok = true;
  return outcome;
}

ExperimentResult run_grid(const ExperimentPlan& plan, const corpus::Corpus& corpus,
                          const std::filesystem::path& results_root) {
  if (plan.families.empty() || plan.loss_kinds.empty())
    fail(Errc::config_error, "grid needs at least one family and one loss");
  ExperimentResult result;
  result.out_dir = results_root / plan.name;
  std::filesystem::create_directories(result.out_dir);
  write_manifest_of_record(plan, result.out_dir);

  for (const auto family : plan.families) {
    for (const auto kind : plan.loss_kinds) {
      CellOutcome outcome;
      const auto label = cell_label(family, kind);
      try {
        outcome = run_cross_validation(corpus, family, kind, plan,
                                       result.out_dir / label);
      } catch (const std::exception& e) {
        // Per-cell failure isolation: one broken configuration must not
        // take down the rest of the grid.
        outcome.label = label;
        outcome.ok = false;
        outcome.error = e.what();
      }
      result.cells.push_back(std::move(outcome));
    }
  }

  std::ofstream csv(result.out_dir / "comparison.csv");
  csv << comparison_csv(result.cells);
  std::ofstream table(result.out_dir / "comparison.txt");
  table << comparison_table(result.cells);
  return result;
}

ExperimentResult run_zero_shot(const ExperimentPlan& plan,
                               const corpus::Corpus& corpus,
                               const std::filesystem::path& results_root) {
  if (plan.holdout_languages.empty())
    fail(Errc::config_error, "zero-shot plan needs holdout_languages");
  ExperimentResult result;
  result.out_dir = results_root / plan.name;
  std::filesystem::create_directories(result.out_dir);
  write_manifest_of_record(plan, result.out_dir);

  for (const auto& language : plan.holdout_languages) {
    std::vector<corpus::AnnotatedInstance> train_set, holdout;
    for (const auto& inst : corpus.instances) {
      if (inst.language == language) holdout.push_back(inst);
      else train_set.push_back(inst);
    }
    if (holdout.empty())
      fail(Errc::empty_holdout, "no instances in holdout language " + language);
    if (train_set.empty())
      fail(Errc::config_error, "holdout would empty the training set");

    for (const auto family : plan.families) {
      for (const auto kind : plan.loss_kinds) {
        CellOutcome outcome;
        const auto label = cell_label(family, kind) + "_excl_" + language;
        try {
          const auto cell_dir = result.out_dir / label;
          std::filesystem::create_directories(cell_dir);
          auto cfg = cell_train_config(plan, family, kind);
          // train once on both folds of everything outside the holdout
          const auto run =
              train::train_instances(train_set, cfg, cell_dir / "model");
          auto records = predict_instances(run.artifact_dir, holdout, "holdout");
          assert_no_leakage(train_set, records);
          for (const auto& inst : train_set)
            if (inst.language == language)
              fail(Errc::protocol_violation,
                   "holdout-language instance in training set");
          outcome.label = label;
          outcome.cell_dir = cell_dir;
          outcome.records = std::move(records);
          write_reports(cell_dir, outcome.records);
          outcome.global =
              metrics::evaluate_grouped(outcome.records, metrics::GroupBy::global);
          outcome.ok = true;
        } catch (const std::exception& e) {
          outcome.label = label;
          outcome.ok = false;
          outcome.error = e.what();
        }
        result.cells.push_back(std::move(outcome));
      }
    }
  }
  return result;
}

ExperimentResult run_ablation(const ExperimentPlan& plan,
                              const corpus::Corpus& corpus,
                              const std::filesystem::path& results_root) {
  ExperimentResult result;
  result.out_dir = results_root / plan.name;
  std::filesystem::create_directories(result.out_dir);
  write_manifest_of_record(plan, result.out_dir);

  std::unordered_set<std::string> known;
  for (const auto& d : corpus.descriptors) known.insert(d.id);
  for (const auto& id : plan.excluded_datasets)
    if (!known.count(id))
      fail(Errc::unknown_dataset_id, id + " is not part of the corpus");

  corpus::Corpus reduced;
  reduced.descriptors = corpus.descriptors;
  const std::unordered_set<std::string> excluded(plan.excluded_datasets.begin(),
                                                 plan.excluded_datasets.end());
  for (const auto& inst : corpus.instances)
    if (!excluded.count(inst.dataset_id)) reduced.instances.push_back(inst);
  if (reduced.instances.empty())
    fail(Errc::config_error, "ablation removed every instance");

  for (const auto family : plan.families) {
    for (const auto kind : plan.loss_kinds) {
      const auto label = cell_label(family, kind);
      // baseline on the full corpus, then the ablated run
      for (const auto& [suffix, data] :
           std::vector<std::pair<std::string, const corpus::Corpus*>>{
               {"_baseline", &corpus}, {"_ablated", &reduced}}) {
        CellOutcome outcome;
        try {
          outcome = run_cross_validation(*data, family, kind, plan,
                                         result.out_dir / (label + suffix));
          outcome.label = label + suffix;
          if (suffix == "_ablated") {
            for (const auto& r : outcome.records)
              if (excluded.count(r.dataset_id))
                fail(Errc::protocol_violation,
                     "excluded dataset leaked into the ablated run");
          }
        } catch (const std::exception& e) {
          outcome.label = label + suffix;
          outcome.ok = false;
          outcome.error = e.what();
        }
        result.cells.push_back(std::move(outcome));
      }
    }
  }

  // side-by-side deltas on the pooled metrics
  std::ofstream delta(result.out_dir / "delta.csv");
  delta << "cell,metric,baseline,ablated,delta\n";
  for (std::size_t i = 0; i + 1 < result.cells.size(); i += 2) {
    const auto& base = result.cells[i];
    const auto& ablated = result.cells[i + 1];
    if (!base.ok || !ablated.ok) continue;
    const auto& bg = base.global.groups.at("global");
    const auto& ag = ablated.global.groups.at("global");
    const auto emit = [&](const char* metric, double b, double a) {
      delta << base.label << ',' << metric << ',' << b << ',' << a << ','
            << (a - b) << '\n';
    };
    if (bg.valence.rho && ag.valence.rho)
      emit("rho_v", *bg.valence.rho, *ag.valence.rho);
    if (bg.arousal.rho && ag.arousal.rho)
      emit("rho_a", *bg.arousal.rho, *ag.arousal.rho);
    emit("rmse_v", bg.valence.rmse, ag.valence.rmse);
    emit("rmse_a", bg.arousal.rmse, ag.arousal.rmse);
    emit("mae_v", bg.valence.mae, ag.valence.mae);
    emit("mae_a", bg.arousal.mae, ag.arousal.mae);
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentPlan& plan,
                                const std::filesystem::path& results_root) {
  corpus::Corpus data = corpus::read_corpus_jsonl(plan.corpus_path);
  if (plan.desk_scale)
    data = subsample_corpus(data, kDeskMaxPerDataset, plan.seed);
  bool any_unassigned = false;
  for (const auto& inst : data.instances)
    any_unassigned |= (inst.fold == corpus::Fold::unassigned);
  if (any_unassigned) corpus::split_folds(data, plan.seed);

  switch (plan.protocol) {
    case Protocol::grid: return run_grid(plan, data, results_root);
    case Protocol::zero_shot: return run_zero_shot(plan, data, results_root);
    case Protocol::ablation: return run_ablation(plan, data, results_root);
  }
  fail(Errc::config_error, "unknown protocol");
}

// ------------------------------------------------------------------
// Plan loading

ExperimentPlan load_plan(const std::filesystem::path& path,
                         const std::optional<std::string>& scale_override) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open plan " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(Errc::config_error, std::string("plan is not valid JSON: ") + e.what());
  }

  ExperimentPlan plan;
  try {
    plan.name = doc.at("name").get<std::string>();
    plan.corpus_path = doc.at("corpus").get<std::string>();
    for (const auto& f : doc.at("families"))
      plan.families.push_back(model::family_from_string(f.get<std::string>()));
    for (const auto& k : doc.at("losses"))
      plan.loss_kinds.push_back(losses::kind_from_string(k.get<std::string>()));
    if (doc.contains("holdout_languages"))
      plan.holdout_languages =
          doc.at("holdout_languages").get<std::vector<std::string>>();
    if (doc.contains("excluded_datasets"))
      plan.excluded_datasets =
          doc.at("excluded_datasets").get<std::vector<std::string>>();
    plan.seed = doc.value("seed", 0);

    std::string scale = doc.value("scale", "desk");
    if (scale_override) scale = *scale_override;
    if (scale != "desk" && scale != "full")
      fail(Errc::config_error, "scale must be desk or full");
    plan.desk_scale = (scale == "desk");

    std::string protocol = doc.value("protocol", "");
    if (protocol.empty()) {
      if (!plan.holdout_languages.empty()) protocol = "zero_shot";
      else if (!plan.excluded_datasets.empty()) protocol = "ablation";
      else protocol = "grid";
    }
    if (protocol == "grid") plan.protocol = Protocol::grid;
    else if (protocol == "zero_shot") plan.protocol = Protocol::zero_shot;
    else if (protocol == "ablation") plan.protocol = Protocol::ablation;
    else fail(Errc::config_error, "unknown protocol '" + protocol + "'");
  } catch (const json::exception& e) {
    fail(Errc::config_error, std::string("bad plan: ") + e.what());
  }

  apply_scale_profile(plan);

  // optional training overrides for desk-scale experimentation
  if (doc.contains("train")) {
    const auto& t = doc.at("train");
    plan.base_train.epochs = t.value("epochs", plan.base_train.epochs);
    plan.base_train.batch_size = t.value("batch_size", plan.base_train.batch_size);
    plan.base_train.learning_rate =
        t.value("learning_rate", plan.base_train.learning_rate);
    plan.base_train.warmup_ratio =
        t.value("warmup_ratio", plan.base_train.warmup_ratio);
    plan.base_train.weight_decay =
        t.value("weight_decay", plan.base_train.weight_decay);
    plan.base_train.grad_clip = t.value("grad_clip", plan.base_train.grad_clip);
    plan.base_train.micro_batch_size =
        t.value("micro_batch_size", plan.base_train.micro_batch_size);
  }
  if (doc.contains("loss")) {
    const auto& l = doc.at("loss");
    plan.base_train.loss.robust_c = l.value("c", plan.base_train.loss.robust_c);
    plan.base_train.loss.adaptive = l.value("adaptive", plan.base_train.loss.adaptive);
    if (l.contains("alpha_bounds")) {
      plan.base_train.loss.alpha_lo = l.at("alpha_bounds").at(0).get<double>();
      plan.base_train.loss.alpha_hi = l.at("alpha_bounds").at(1).get<double>();
    }
  }
  return plan;
}

// ------------------------------------------------------------------
// Comparison rendering

namespace {

struct Row {
  std::string label;
  bool ok;
  double rho_v, rho_a, rmse_v, rmse_a, mae_v, mae_a;
};

std::vector<Row> rows_from_cells(const std::vector<CellOutcome>& cells) {
  std::vector<Row> rows;
  for (const auto& c : cells) {
    Row r{};
    r.label = c.label;
    r.ok = c.ok;
    if (c.ok) {
      const auto& g = c.global.groups.at("global");
      r.rho_v = g.valence.rho.value_or(std::nan(""));
      r.rho_a = g.arousal.rho.value_or(std::nan(""));
      r.rmse_v = g.valence.rmse;
      r.rmse_a = g.arousal.rmse;
      r.mae_v = g.valence.mae;
      r.mae_a = g.arousal.mae;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

std::string comparison_csv(const std::vector<CellOutcome>& cells) {
  std::ostringstream out;
  out << "cell,status,rho_v,rho_a,rmse_v,rmse_a,mae_v,mae_a\n";
  for (const auto& r : rows_from_cells(cells)) {
    if (!r.ok) {
      out << r.label << ",failed,,,,,,\n";
      continue;
    }
    out << r.label << ",ok," << r.rho_v << ',' << r.rho_a << ',' << r.rmse_v << ','
        << r.rmse_a << ',' << r.mae_v << ',' << r.mae_a << '\n';
  }
  return out.str();
}

std::string comparison_table(const std::vector<CellOutcome>& cells) {
  const auto rows = rows_from_cells(cells);
  double best[6] = {-2.0, -2.0, 1e9, 1e9, 1e9, 1e9};
  for (const auto& r : rows) {
    if (!r.ok) continue;
    best[0] = std::max(best[0], r.rho_v);
    best[1] = std::max(best[1], r.rho_a);
    best[2] = std::min(best[2], r.rmse_v);
    best[3] = std::min(best[3], r.rmse_a);
    best[4] = std::min(best[4], r.mae_v);
    best[5] = std::min(best[5], r.mae_a);
  }
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-32s %9s %9s %9s %9s %9s %9s\n", "cell",
                "rho_V", "rho_A", "RMSE_V", "RMSE_A", "MAE_V", "MAE_A");
  out << line;
  for (const auto& r : rows) {
    if (!r.ok) {
      std::snprintf(line, sizeof line, "%-32s %s\n", r.label.c_str(), "FAILED");
      out << line;
      continue;
    }
    const double vals[6] = {r.rho_v, r.rho_a, r.rmse_v, r.rmse_a, r.mae_v, r.mae_a};
    std::snprintf(line, sizeof line, "%-32s", r.label.c_str());
    out << line;
    for (int i = 0; i < 6; ++i) {
      const bool is_best = std::abs(vals[i] - best[i]) < 1e-12;
      std::snprintf(line, sizeof line, " %8.3f%s", vals[i], is_best ? "*" : " ");
      out << line;
    }
    out << "\n";
  }
  out << "(* best value per column)\n";
  return out.str();
}

}  // namespace vareg::experiments
