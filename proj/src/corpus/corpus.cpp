#include "vareg/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "vareg/common.hpp"

namespace vareg::corpus {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

Granularity granularity_from_string(const std::string& s) {
  if (s == "word") return Granularity::word;
  if (s == "short_text") return Granularity::short_text;
  fail(Errc::config_error, "unknown granularity '" + s + "'");
}

const char* granularity_to_string(Granularity g) {
  return g == Granularity::word ? "word" : "short_text";
}

Fold fold_from_string(const std::string& s) {
  if (s == "A") return Fold::A;
  if (s == "B") return Fold::B;
  if (s == "unassigned") return Fold::unassigned;
  fail(Errc::config_error, "unknown fold '" + s + "'");
}

const char* fold_to_string(Fold f) {
  switch (f) {
    case Fold::A: return "A";
    case Fold::B: return "B";
    default: return "unassigned";
  }
}

void DatasetDescriptor::validate() const {
  if (id.empty()) fail(Errc::config_error, "dataset id must be nonempty");
  if (language.empty())
    fail(Errc::config_error, id + ": language must be nonempty");
  if (!(scale_min < scale_max))
    fail(Errc::degenerate_scale,
         id + ": scale_min must be strictly below scale_max");
}

const DatasetDescriptor* Corpus::descriptor(const std::string& dataset_id) const {
  for (const auto& d : descriptors)
    if (d.id == dataset_id) return &d;
  return nullptr;
}

double aggregate_annotations(std::span<const double> ratings) {
  if (ratings.empty())
    fail(Errc::empty_annotation_list, "no annotator ratings to aggregate");
  const double sum = std::accumulate(ratings.begin(), ratings.end(), 0.0);
  return sum / static_cast<double>(ratings.size());
}

double normalize_rating(double x, double scale_min, double scale_max) {
  if (scale_min == scale_max)
    fail(Errc::degenerate_scale, "scale endpoints coincide");
  if (scale_min > scale_max)
    fail(Errc::degenerate_scale, "scale_min above scale_max");
  if (x < scale_min || x > scale_max)
    fail(Errc::rating_out_of_range, "rating outside declared scale");
  return (x - scale_min) / (scale_max - scale_min);
}

double denormalize_rating(double z, double scale_min, double scale_max) {
  if (scale_min >= scale_max)
    fail(Errc::degenerate_scale, "invalid scale endpoints");
  return scale_min + z * (scale_max - scale_min);
}

Corpus merge_corpus(const std::vector<DatasetDescriptor>& manifest,
                    const std::vector<std::vector<RawRecord>>& parsed) {
  if (manifest.size() != parsed.size())
    fail(Errc::config_error, "manifest and parse list sizes differ");
  Corpus corpus;
  corpus.descriptors = manifest;
  std::unordered_set<std::string> seen_ids;
  for (std::size_t d = 0; d < manifest.size(); ++d) {
    const auto& desc = manifest[d];
    desc.validate();
    for (std::size_t r = 0; r < parsed[d].size(); ++r) {
      const auto& rec = parsed[d][r];
      AnnotatedInstance inst;
      inst.instance_id = desc.id + ":" + std::to_string(r);
      if (!seen_ids.insert(inst.instance_id).second)
        fail(Errc::duplicate_instance_id, inst.instance_id);
      inst.dataset_id = desc.id;
      inst.language = desc.language;
      inst.granularity = desc.granularity;
      inst.text = rec.text;
      inst.valence = normalize_rating(aggregate_annotations(rec.valence_ratings),
                                      desc.scale_min, desc.scale_max);
      inst.arousal = normalize_rating(aggregate_annotations(rec.arousal_ratings),
                                      desc.scale_min, desc.scale_max);
      inst.fold = Fold::unassigned;
      corpus.instances.push_back(std::move(inst));
    }
  }
  return corpus;
}

void split_folds(Corpus& corpus, std::uint64_t seed) {
  // Group instance indices per dataset, then shuffle each group with a
  // sub-seed derived from the dataset id: the assignment of one dataset
  // is independent of which other datasets are present.
  std::map<std::string, std::vector<std::size_t>> by_dataset;
  for (std::size_t i = 0; i < corpus.instances.size(); ++i)
    by_dataset[corpus.instances[i].dataset_id].push_back(i);

  for (auto& [dataset_id, indices] : by_dataset) {
    std::mt19937_64 rng(derive_seed(seed, dataset_id));
    std::shuffle(indices.begin(), indices.end(), rng);
    const std::size_t a_size = (indices.size() + 1) / 2;  // odd one goes to A
    for (std::size_t k = 0; k < indices.size(); ++k)
      corpus.instances[indices[k]].fold = (k < a_size) ? Fold::A : Fold::B;
  }
}

namespace {

int count_words(const std::string& text) {
  int words = 0;
  bool in_word = false;
  for (const char c : text) {
    const bool ws = std::isspace(static_cast<unsigned char>(c));
    if (!ws && !in_word) ++words;
    in_word = !ws;
  }
  return words;
}

struct Accumulator {
  std::int64_t count = 0;
  double length_sum = 0.0;
  double v_sum = 0.0, v_sq = 0.0;
  double a_sum = 0.0, a_sq = 0.0;
  std::array<std::int64_t, 10> v_hist{};
  std::array<std::int64_t, 10> a_hist{};

  void add(const AnnotatedInstance& inst) {
    ++count;
    length_sum += count_words(inst.text);
    v_sum += inst.valence;
    v_sq += inst.valence * inst.valence;
    a_sum += inst.arousal;
    a_sq += inst.arousal * inst.arousal;
    ++v_hist[std::min(9, static_cast<int>(inst.valence * 10.0))];
    ++a_hist[std::min(9, static_cast<int>(inst.arousal * 10.0))];
  }

  GroupStats finish() const {
    GroupStats g;
    g.count = count;
    const double n = static_cast<double>(count);
    g.mean_text_length = length_sum / n;
    g.valence.mean = v_sum / n;
    g.valence.stddev = std::sqrt(std::max(0.0, v_sq / n - g.valence.mean * g.valence.mean));
    g.valence.histogram = v_hist;
    g.arousal.mean = a_sum / n;
    g.arousal.stddev = std::sqrt(std::max(0.0, a_sq / n - g.arousal.mean * g.arousal.mean));
    g.arousal.histogram = a_hist;
    return g;
  }
};

}  // namespace

CorpusStats corpus_stats(const Corpus& corpus) {
  if (corpus.instances.empty()) fail(Errc::empty_set, "corpus is empty");
  Accumulator global;
  std::map<std::string, Accumulator> by_dataset, by_language, by_granularity;
  for (const auto& inst : corpus.instances) {
    global.add(inst);
    by_dataset[inst.dataset_id].add(inst);
    by_language[inst.language].add(inst);
    by_granularity[granularity_to_string(inst.granularity)].add(inst);
  }
  CorpusStats stats;
  stats.global = global.finish();
  for (const auto& [k, acc] : by_dataset) stats.by_dataset[k] = acc.finish();
  for (const auto& [k, acc] : by_language) stats.by_language[k] = acc.finish();
  for (const auto& [k, acc] : by_granularity) stats.by_granularity[k] = acc.finish();
  return stats;
}

QuadFit quadratic_va_fit(const Corpus& corpus) {
  std::set<double> distinct;
  for (const auto& inst : corpus.instances) distinct.insert(inst.valence);
  if (corpus.instances.size() < 3 || distinct.size() < 3)
    fail(Errc::rank_deficient,
         "quadratic fit needs 3 instances with 3 distinct valence values");

  // Normal equations for the basis (1, v, v^2).
  double m[3][3] = {};
  double rhs[3] = {};
  for (const auto& inst : corpus.instances) {
    const double phi[3] = {1.0, inst.valence, inst.valence * inst.valence};
    for (int i = 0; i < 3; ++i) {
      rhs[i] += phi[i] * inst.arousal;
      for (int j = 0; j < 3; ++j) m[i][j] += phi[i] * phi[j];
    }
  }
  // Gaussian elimination with partial pivoting.
  int perm[3] = {0, 1, 2};
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[perm[r]][col]) > std::abs(m[perm[pivot]][col])) pivot = r;
    std::swap(perm[col], perm[pivot]);
    const double diag = m[perm[col]][col];
    if (std::abs(diag) < 1e-12) fail(Errc::rank_deficient, "singular normal equations");
    for (int r = col + 1; r < 3; ++r) {
      const double factor = m[perm[r]][col] / diag;
      for (int c = col; c < 3; ++c) m[perm[r]][c] -= factor * m[perm[col]][c];
      rhs[perm[r]] -= factor * rhs[perm[col]];
    }
  }
  double coef[3];
  for (int i = 2; i >= 0; --i) {
    double acc = rhs[perm[i]];
    for (int j = i + 1; j < 3; ++j) acc -= m[perm[i]][j] * coef[j];
    coef[i] = acc / m[perm[i]][i];
  }
  return {coef[2], coef[1], coef[0]};
}

// ------------------------------------------------------------------
// File formats.

std::vector<DatasetDescriptor> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io_error, "cannot open manifest " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(Errc::config_error, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_array() || doc.empty())
    fail(Errc::config_error, "manifest must be a nonempty JSON array");
  std::vector<DatasetDescriptor> manifest;
  std::unordered_set<std::string> ids;
  for (const auto& entry : doc) {
    DatasetDescriptor d;
    try {
      d.id = entry.at("id").get<std::string>();
      d.language = entry.at("language").get<std::string>();
      d.granularity = granularity_from_string(entry.at("granularity").get<std::string>());
      d.scale_min = entry.at("scale_min").get<double>();
      d.scale_max = entry.at("scale_max").get<double>();
      d.adapter = entry.at("adapter").get<std::string>();
      d.source_uri = entry.at("source_uri").get<std::string>();
      if (entry.contains("checksum") && !entry.at("checksum").is_null())
        d.checksum = entry.at("checksum").get<std::string>();
    } catch (const json::exception& e) {
      fail(Errc::config_error, std::string("bad manifest entry: ") + e.what());
    }
    d.validate();
    if (!ids.insert(d.id).second)
      fail(Errc::config_error, "duplicate dataset id '" + d.id + "' in manifest");
    manifest.push_back(std::move(d));
  }
  return manifest;
}

void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io_error, "cannot write corpus to " + path.string());
  char score[32];
  for (const auto& inst : corpus.instances) {
    out << "{\"instance_id\":" << json(inst.instance_id).dump()
        << ",\"dataset_id\":" << json(inst.dataset_id).dump()
        << ",\"language\":" << json(inst.language).dump() << ",\"granularity\":\""
        << granularity_to_string(inst.granularity)
        << "\",\"text\":" << json(inst.text).dump();
    std::snprintf(score, sizeof score, "%.8f", inst.valence);
    out << ",\"valence\":" << score;
    std::snprintf(score, sizeof score, "%.8f", inst.arousal);
    out << ",\"arousal\":" << score;
    out << ",\"fold\":\"" << fold_to_string(inst.fold) << "\"}\n";
  }
}

Corpus read_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open corpus " + path.string());
  Corpus corpus;
  std::map<std::string, std::size_t> seen_descriptors;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      fail(Errc::malformed_row,
           path.string() + " line " + std::to_string(row) + ": " + e.what());
    }
    AnnotatedInstance inst;
    try {
      inst.instance_id = obj.at("instance_id").get<std::string>();
      inst.dataset_id = obj.at("dataset_id").get<std::string>();
      inst.language = obj.at("language").get<std::string>();
      inst.granularity =
          granularity_from_string(obj.at("granularity").get<std::string>());
      inst.text = obj.at("text").get<std::string>();
      inst.valence = obj.at("valence").get<double>();
      inst.arousal = obj.at("arousal").get<double>();
      inst.fold = fold_from_string(obj.at("fold").get<std::string>());
    } catch (const json::exception& e) {
      fail(Errc::malformed_row,
           path.string() + " line " + std::to_string(row) + ": " + e.what());
    }
    if (inst.valence < 0.0 || inst.valence > 1.0 || inst.arousal < 0.0 ||
        inst.arousal > 1.0)
      fail(Errc::rating_out_of_range,
           inst.instance_id + ": score outside the unit interval");
    if (!ids.insert(inst.instance_id).second)
      fail(Errc::duplicate_instance_id, inst.instance_id);
    if (!seen_descriptors.count(inst.dataset_id)) {
      // Skeleton descriptor; scales are gone after normalization.
      DatasetDescriptor d;
      d.id = inst.dataset_id;
      d.language = inst.language;
      d.granularity = inst.granularity;
      d.scale_min = 0.0;
      d.scale_max = 1.0;
      d.adapter = "";
      seen_descriptors[d.id] = corpus.descriptors.size();
      corpus.descriptors.push_back(std::move(d));
    }
    corpus.instances.push_back(std::move(inst));
  }
  return corpus;
}

namespace {

ordered_json group_to_json(const GroupStats& g) {
  ordered_json j;
  j["count"] = g.count;
  j["mean_text_length"] = g.mean_text_length;
  j["valence"] = {{"mean", g.valence.mean},
                  {"stddev", g.valence.stddev},
                  {"histogram", g.valence.histogram}};
  j["arousal"] = {{"mean", g.arousal.mean},
                  {"stddev", g.arousal.stddev},
                  {"histogram", g.arousal.histogram}};
  return j;
}

}  // namespace

std::string stats_to_json(const CorpusStats& stats,
                          const std::vector<std::string>& skipped_datasets) {
  ordered_json j;
  j["global"] = group_to_json(stats.global);
  j["by_dataset"] = ordered_json::object();
  for (const auto& [k, g] : stats.by_dataset) j["by_dataset"][k] = group_to_json(g);
  j["by_language"] = ordered_json::object();
  for (const auto& [k, g] : stats.by_language) j["by_language"][k] = group_to_json(g);
  j["by_granularity"] = ordered_json::object();
  for (const auto& [k, g] : stats.by_granularity)
    j["by_granularity"][k] = group_to_json(g);
  j["skipped_datasets"] = skipped_datasets;
  return j.dump(2);
}

std::uint64_t file_content_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace vareg::corpus
