#include "vareg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vareg/common.hpp"

namespace vareg::metrics {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(Errc::length_mismatch, "vector lengths differ");
  if (x.empty()) fail(Errc::empty_set, "empty vectors");
}

bool is_constant(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] != v[0]) return false;
  return true;
}

}  // namespace

double mae(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
  return acc / static_cast<double>(x.size());
}

double rmse(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  if (x.size() < 2) fail(Errc::constant_input, "need at least two points");
  if (is_constant(x) || is_constant(y))
    fail(Errc::constant_input, "correlation undefined on a constant vector");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

GroupBy group_by_from_string(const std::string& s) {
  if (s == "dataset") return GroupBy::dataset;
  if (s == "language") return GroupBy::language;
  if (s == "granularity") return GroupBy::granularity;
  if (s == "global") return GroupBy::global;
  fail(Errc::config_error, "unknown group-by key '" + s + "'");
}

const char* group_by_to_string(GroupBy g) {
  switch (g) {
    case GroupBy::dataset: return "dataset";
    case GroupBy::language: return "language";
    case GroupBy::granularity: return "granularity";
    case GroupBy::global: return "global";
  }
  return "?";
}

namespace {

DimensionMetrics score_dimension(const std::vector<double>& gold,
                                 const std::vector<double>& pred) {
  DimensionMetrics m;
  m.mae = mae(gold, pred);
  m.rmse = rmse(gold, pred);
  try {
    m.rho = pearson(gold, pred);
  } catch (const ToolkitError& e) {
    // Undefined correlation is reported, not substituted with a number.
    m.rho.reset();
    m.rho_undefined_reason = gold.size() < 2 ? "single_record" : "constant_input";
  }
  return m;
}

}  // namespace

MetricsReport evaluate_grouped(std::span<const PredictionRecord> records,
                               GroupBy group_by) {
  if (records.empty()) fail(Errc::empty_set, "no prediction records");
  MetricsReport report;
  report.group_by = group_by;

  std::map<std::string, std::vector<const PredictionRecord*>> groups;
  for (const auto& r : records) {
    std::string key;
    switch (group_by) {
      case GroupBy::dataset: key = r.dataset_id; break;
      case GroupBy::language: key = r.language; break;
      case GroupBy::granularity: key = r.granularity; break;
      case GroupBy::global: key = "global"; break;
    }
    groups[key].push_back(&r);
  }

  for (const auto& [key, members] : groups) {
    std::vector<double> gv, ga, pv, pa;
    gv.reserve(members.size());
    for (const auto* r : members) {
      gv.push_back(r->gold_v);
      ga.push_back(r->gold_a);
      pv.push_back(r->pred_v);
      pa.push_back(r->pred_a);
    }
    GroupMetrics g;
    g.n = static_cast<std::int64_t>(members.size());
    g.valence = score_dimension(gv, pv);
    g.arousal = score_dimension(ga, pa);
    report.groups[key] = std::move(g);
  }
  return report;
}

namespace {

ordered_json dimension_to_json(const DimensionMetrics& m) {
  ordered_json j;
  if (m.rho) {
    j["rho"] = *m.rho;
  } else {
    j["rho"] = nullptr;
    j["rho_undefined_reason"] = m.rho_undefined_reason;
  }
  j["rmse"] = m.rmse;
  j["mae"] = m.mae;
  return j;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
  ordered_json j;
  j["group_by"] = group_by_to_string(report.group_by);
  j["groups"] = ordered_json::object();
  for (const auto& [key, g] : report.groups) {
    ordered_json e;
    e["n"] = g.n;
    e["valence"] = dimension_to_json(g.valence);
    e["arousal"] = dimension_to_json(g.arousal);
    j["groups"][key] = e;
  }
  return j.dump(2);
}

std::string report_to_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "group,dimension,rho,rmse,mae,n\n";
  for (const auto& [key, g] : report.groups) {
    const auto emit = [&](const char* dim, const DimensionMetrics& m) {
      out << key << ',' << dim << ',';
      if (m.rho)
        out << *m.rho;
      else
        out << "";
      out << ',' << m.rmse << ',' << m.mae << ',' << g.n << '\n';
    };
    emit("valence", g.valence);
    emit("arousal", g.arousal);
  }
  return out.str();
}

std::string report_to_table(const MetricsReport& report, const std::string& title) {
  std::ostringstream out;
  out << title << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %8s %8s %8s %8s %8s %8s %8s\n",
                group_by_to_string(report.group_by), "rho_V", "rho_A", "RMSE_V",
                "RMSE_A", "MAE_V", "MAE_A", "n");
  out << line;
  for (const auto& [key, g] : report.groups) {
    const std::string rho_v = g.valence.rho ? fmt3(*g.valence.rho) : "n/a";
    const std::string rho_a = g.arousal.rho ? fmt3(*g.arousal.rho) : "n/a";
    std::snprintf(line, sizeof line, "%-24s %8s %8s %8s %8s %8s %8s %8lld\n",
                  key.c_str(), rho_v.c_str(), rho_a.c_str(),
                  fmt3(g.valence.rmse).c_str(), fmt3(g.arousal.rmse).c_str(),
                  fmt3(g.valence.mae).c_str(), fmt3(g.arousal.mae).c_str(),
                  static_cast<long long>(g.n));
    out << line;
  }
  return out.str();
}

void write_records_jsonl(std::span<const PredictionRecord> records,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io_error, "cannot write records to " + path.string());
  char score[32];
  for (const auto& r : records) {
    out << "{\"instance_id\":" << json(r.instance_id).dump()
        << ",\"dataset_id\":" << json(r.dataset_id).dump()
        << ",\"language\":" << json(r.language).dump() << ",\"granularity\":\""
        << r.granularity << "\",\"fold\":\"" << r.fold << "\"";
    const auto field = [&](const char* name, double v) {
      std::snprintf(score, sizeof score, "%.8f", v);
      out << ",\"" << name << "\":" << score;
    };
    field("gold_v", r.gold_v);
    field("gold_a", r.gold_a);
    field("pred_v", r.pred_v);
    field("pred_a", r.pred_a);
    out << "}\n";
  }
}

std::vector<PredictionRecord> read_records_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open records " + path.string());
  std::vector<PredictionRecord> records;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    try {
      const json obj = json::parse(line);
      PredictionRecord r;
      r.instance_id = obj.at("instance_id").get<std::string>();
      r.dataset_id = obj.at("dataset_id").get<std::string>();
      r.language = obj.at("language").get<std::string>();
      r.granularity = obj.at("granularity").get<std::string>();
      r.fold = obj.at("fold").get<std::string>();
      r.gold_v = obj.at("gold_v").get<double>();
      r.gold_a = obj.at("gold_a").get<double>();
      r.pred_v = obj.at("pred_v").get<double>();
      r.pred_a = obj.at("pred_a").get<double>();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      fail(Errc::malformed_row,
           path.string() + " line " + std::to_string(row) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace vareg::metrics
