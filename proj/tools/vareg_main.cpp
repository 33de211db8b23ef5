// vareg: multilingual valence-arousal text regression toolkit.
//
// Exit codes, stable for automation:
//   0 success, 2 usage/config error, 3 data error, 4 safety refusal.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vareg/common.hpp"
#include "vareg/corpus/adapters.hpp"
#include "vareg/corpus/corpus.hpp"
#include "vareg/experiments.hpp"
#include "vareg/fixture.hpp"
#include "vareg/metrics.hpp"
#include "vareg/model/head.hpp"
#include "vareg/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vareg;

namespace {

int exit_code_for(const ToolkitError& e) {
  switch (e.code()) {
    case Errc::config_error:
    case Errc::unknown_adapter:
    case Errc::checkpoint_unavailable:
    case Errc::degenerate_scale:
    case Errc::unknown_dataset_id:
      return 2;
    default:
      return 3;
  }
}

fs::path resolve_data_path(const std::string& uri, const fs::path& manifest_dir) {
  fs::path p(uri);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("VAREG_DATA_ROOT")) {
    const fs::path candidate = fs::path(root) / p;
    if (fs::exists(candidate)) return candidate;
  }
  return manifest_dir / p;
}

int cmd_build_corpus(const std::string& manifest_path, const std::string& output,
                     const std::string& stats_path, std::uint64_t seed) {
  const auto manifest = corpus::load_manifest(manifest_path);
  const fs::path manifest_dir = fs::path(manifest_path).parent_path();

  std::vector<corpus::DatasetDescriptor> present;
  std::vector<std::vector<corpus::RawRecord>> parsed;
  std::vector<std::string> skipped;
  for (const auto& d : manifest) {
    const fs::path file = resolve_data_path(d.source_uri, manifest_dir);
    if (!fs::exists(file)) {
      std::cerr << "warning: dataset " << d.id << " skipped, missing file "
                << file.string() << "\n";
      skipped.push_back(d.id);
      continue;
    }
    std::ifstream in(file, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    parsed.push_back(corpus::parse_dataset(d, bytes));
    present.push_back(d);
  }
  if (present.empty()) {
    std::cerr << "error: no dataset file could be found\n";
    return 3;
  }

  corpus::Corpus merged = corpus::merge_corpus(present, parsed);
  corpus::split_folds(merged, seed);
  corpus::write_corpus_jsonl(merged, output);

  const auto stats = corpus::corpus_stats(merged);
  const fs::path stats_file =
      stats_path.empty() ? fs::path(output).replace_extension(".stats.json")
                         : fs::path(stats_path);
  std::ofstream stats_out(stats_file);
  stats_out << corpus::stats_to_json(stats, skipped) << "\n";

  std::cout << "corpus: " << merged.instances.size() << " instances from "
            << present.size() << " datasets -> " << output << "\n";
  std::cout << "stats:  " << stats_file.string() << "\n";
  if (!skipped.empty()) std::cout << "skipped " << skipped.size() << " dataset(s)\n";
  return 0;
}

int cmd_train(const std::string& config_path, bool force) {
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "error: cannot open config " << config_path << "\n";
    return 2;
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    std::cerr << "error: config is not valid JSON: " << e.what() << "\n";
    return 2;
  }

  train::TrainConfig cfg;
  std::string corpus_path, run_id, runs_root = "runs";
  try {
    corpus_path = doc.at("corpus").get<std::string>();
    run_id = doc.at("run_id").get<std::string>();
    runs_root = doc.value("runs_root", runs_root);
    cfg.checkpoint_id = doc.value("checkpoint_id", cfg.checkpoint_id);
    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      cfg.batch_size = t.value("batch_size", cfg.batch_size);
      cfg.epochs = t.value("epochs", cfg.epochs);
      cfg.learning_rate = t.value("learning_rate", cfg.learning_rate);
      cfg.warmup_ratio = t.value("warmup_ratio", cfg.warmup_ratio);
      cfg.weight_decay = t.value("weight_decay", cfg.weight_decay);
      cfg.seed = t.value("seed", cfg.seed);
      cfg.micro_batch_size = t.value("micro_batch_size", cfg.micro_batch_size);
      cfg.grad_clip = t.value("grad_clip", cfg.grad_clip);
      if (t.contains("fold_to_train"))
        cfg.fold_to_train =
            corpus::fold_from_string(t.at("fold_to_train").get<std::string>());
    }
    if (doc.contains("loss")) {
      const auto& l = doc.at("loss");
      cfg.loss.kind = losses::kind_from_string(l.value("kind", "mse"));
      if (l.contains("robust")) {
        const auto& r = l.at("robust");
        cfg.loss.robust_c = r.value("c", cfg.loss.robust_c);
        cfg.loss.robust_alpha = r.value("alpha_init", cfg.loss.robust_alpha);
        cfg.loss.adaptive = r.value("adaptive", cfg.loss.adaptive);
        if (r.contains("alpha_bounds")) {
          cfg.loss.alpha_lo = r.at("alpha_bounds").at(0).get<double>();
          cfg.loss.alpha_hi = r.at("alpha_bounds").at(1).get<double>();
        }
      }
      const std::string fb = l.value("small_batch_fallback", "substitute_mse");
      if (fb == "substitute_mse")
        cfg.loss.small_batch_fallback = losses::SmallBatchFallback::substitute_mse;
      else if (fb == "raise_error")
        cfg.loss.small_batch_fallback = losses::SmallBatchFallback::raise_error;
      else {
        std::cerr << "error: unknown small_batch_fallback '" << fb << "'\n";
        return 2;
      }
    }
  } catch (const json::exception& e) {
    std::cerr << "error: bad config: " << e.what() << "\n";
    return 2;
  }

  if (!fs::exists(corpus_path)) {
    std::cerr << "error: corpus file " << corpus_path << " does not exist\n";
    return 2;
  }
  const fs::path out_dir =
      fs::path(runs_root) / run_id /
      (std::string("fold_") + corpus::fold_to_string(cfg.fold_to_train));
  if (fs::exists(out_dir) && !force) {
    std::cerr << "refusing to overwrite existing run dir " << out_dir.string()
              << " (use --force)\n";
    return 4;
  }

  const auto data = corpus::read_corpus_jsonl(corpus_path);
  const auto result = train::train_fold(data, cfg.fold_to_train, cfg, out_dir);
  std::cout << "trained fold " << corpus::fold_to_string(cfg.fold_to_train)
            << ": steps=" << result.steps
            << " final_mean_loss=" << result.final_epoch_mean_loss
            << " artifact=" << result.artifact_dir.string() << "\n";
  return 0;
}

int cmd_predict(const std::string& artifact_dir, const std::string& input_path) {
  std::optional<model::Predictor> predictor;
  try {
    predictor = model::load_predictor(artifact_dir);
  } catch (const ToolkitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  std::istream* in = &std::cin;
  std::ifstream file;
  if (!input_path.empty()) {
    file.open(input_path, std::ios::binary);
    if (!file) {
      std::cerr << "error: cannot open input " << input_path << "\n";
      return 3;
    }
    in = &file;
  }

  std::vector<std::string> texts;
  std::string line;
  while (std::getline(*in, line)) texts.push_back(line);
  if (texts.empty()) return 0;

  const auto predictions = predictor->predict(texts);
  char score[32];
  for (std::size_t i = 0; i < texts.size(); ++i) {
    std::cout << "{\"text\":" << json(texts[i]).dump();
    std::snprintf(score, sizeof score, "%.8f", predictions[i].valence);
    std::cout << ",\"valence\":" << score;
    std::snprintf(score, sizeof score, "%.8f", predictions[i].arousal);
    std::cout << ",\"arousal\":" << score << "}\n";
  }
  return 0;
}

int cmd_experiment(const std::string& plan_path, const std::string& scale,
                   const std::string& results_root) {
  std::optional<std::string> scale_override;
  if (!scale.empty()) scale_override = scale;
  const auto plan = experiments::load_plan(plan_path, scale_override);
  const auto result = experiments::run_experiment(plan, results_root);
  bool all_ok = true;
  for (const auto& cell : result.cells) {
    std::cout << (cell.ok ? "ok     " : "FAILED ") << cell.label;
    if (!cell.ok) std::cout << "  (" << cell.error << ")";
    std::cout << "\n";
    all_ok &= cell.ok;
  }
  std::cout << "results: " << result.out_dir.string() << "\n";
  return all_ok ? 0 : 3;
}

int cmd_report(const std::string& results_dir, const std::string& group_by_key) {
  const auto group_by = metrics::group_by_from_string(group_by_key);
  const fs::path root(results_dir);
  if (!fs::exists(root)) {
    std::cerr << "error: results directory " << results_dir << " not found\n";
    return 2;
  }
  bool found = false;
  std::vector<fs::path> cells;
  if (fs::exists(root / "records.jsonl")) {
    cells.push_back(root);
  } else {
    for (const auto& entry : fs::directory_iterator(root))
      if (entry.is_directory() && fs::exists(entry.path() / "records.jsonl"))
        cells.push_back(entry.path());
  }
  std::sort(cells.begin(), cells.end());
  for (const auto& cell : cells) {
    const auto records = metrics::read_records_jsonl(cell / "records.jsonl");
    const auto report = metrics::evaluate_grouped(records, group_by);
    std::cout << metrics::report_to_table(report, cell.filename().string()) << "\n";
    found = true;
  }
  if (!found) {
    std::cerr << "error: no records.jsonl under " << results_dir << "\n";
    return 2;
  }
  const fs::path comparison = root / "comparison.txt";
  if (fs::exists(comparison)) {
    std::ifstream in(comparison);
    std::cout << in.rdbuf();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multilingual valence-arousal text regression toolkit"};
  app.require_subcommand(1);

  // build-corpus
  std::string manifest, corpus_out = "corpus.jsonl", stats_out;
  std::uint64_t seed = 0;
  auto* build = app.add_subcommand("build-corpus",
                                   "merge datasets into a normalized corpus");
  build->add_option("--manifest", manifest, "manifest JSON")->required();
  build->add_option("--output", corpus_out, "corpus JSONL output");
  build->add_option("--stats", stats_out, "stats JSON output");
  build->add_option("--seed", seed, "fold-split seed");

  // train
  std::string train_config;
  bool force = false;
  auto* train_cmd = app.add_subcommand("train", "fine-tune on one fold");
  train_cmd->add_option("--config", train_config, "run config JSON")->required();
  train_cmd->add_flag("--force", force, "overwrite an existing run directory");

  // predict
  std::string artifact, input;
  auto* predict = app.add_subcommand("predict", "score texts with an artifact");
  predict->add_option("--artifact", artifact, "predictor directory")->required();
  predict->add_option("--input", input, "text file, one input per line (default stdin)");

  // experiment
  std::string plan, scale, results_root = "experiments";
  auto* experiment = app.add_subcommand("experiment", "run an experiment plan");
  experiment->add_option("--plan", plan, "plan JSON")->required();
  experiment->add_option("--scale", scale, "desk or full")
      ->check(CLI::IsMember({"desk", "full"}));
  experiment->add_option("--results", results_root, "results root directory");

  // report
  std::string results_dir, group_by = "global";
  auto* report = app.add_subcommand("report", "render metric tables");
  report->add_option("--results", results_dir, "experiment results directory")
      ->required();
  report->add_option("--group-by", group_by, "dataset|language|granularity|global");

  // make-fixture
  std::string fixture_dir = "fixtures";
  auto* fixture_cmd = app.add_subcommand(
      "make-fixture", "regenerate the bundled synthetic fixture datasets");
  fixture_cmd->add_option("--out", fixture_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (build->parsed())
      return cmd_build_corpus(manifest, corpus_out, stats_out, seed);
    if (train_cmd->parsed()) return cmd_train(train_config, force);
    if (predict->parsed()) return cmd_predict(artifact, input);
    if (experiment->parsed()) return cmd_experiment(plan, scale, results_root);
    if (report->parsed()) return cmd_report(results_dir, group_by);
    if (fixture_cmd->parsed()) {
      vareg::fixture::write_fixture(fixture_dir);
      std::cout << "fixture written to " << fixture_dir << "\n";
      return 0;
    }
  } catch (const ToolkitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
