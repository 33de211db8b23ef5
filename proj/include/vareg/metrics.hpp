#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vareg::metrics {

struct PredictionRecord {
  std::string instance_id;
  std::string dataset_id;
  std::string language;
  std::string granularity;  // "word" | "short_text"
  std::string fold;         // "A" | "B"
  double gold_v = 0.0, gold_a = 0.0;
  double pred_v = 0.0, pred_a = 0.0;
};

double mae(std::span<const double> x, std::span<const double> y);
double rmse(std::span<const double> x, std::span<const double> y);
// Throws ConstantInput when either vector has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

enum class GroupBy { dataset, language, granularity, global };
GroupBy group_by_from_string(const std::string& s);
const char* group_by_to_string(GroupBy g);

struct DimensionMetrics {
  std::optional<double> rho;  // absent when Pearson is undefined
  std::string rho_undefined_reason;
  double rmse = 0.0;
  double mae = 0.0;
};

struct GroupMetrics {
  std::int64_t n = 0;
  DimensionMetrics valence;
  DimensionMetrics arousal;
};

struct MetricsReport {
  GroupBy group_by = GroupBy::global;
  // group key -> metrics; the global report uses the single key "global".
  std::map<std::string, GroupMetrics> groups;
};

// Pools all records of a group, then scores the pool (records from both
// folds are merged before any metric is computed).
MetricsReport evaluate_grouped(std::span<const PredictionRecord> records,
                               GroupBy group_by);

// Serialization: machine-readable JSON, the CSV row format
// (group, dimension, rho, rmse, mae, n) and a fixed-width text table
// rounded to 3 decimals.
std::string report_to_json(const MetricsReport& report);
std::string report_to_csv(const MetricsReport& report);
std::string report_to_table(const MetricsReport& report, const std::string& title);

void write_records_jsonl(std::span<const PredictionRecord> records,
                         const std::filesystem::path& path);
std::vector<PredictionRecord> read_records_jsonl(const std::filesystem::path& path);

}  // namespace vareg::metrics
