#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vareg::corpus {

enum class Granularity { word, short_text };
enum class Fold { A, B, unassigned };

Granularity granularity_from_string(const std::string& s);
const char* granularity_to_string(Granularity g);
Fold fold_from_string(const std::string& s);
const char* fold_to_string(Fold f);

// Per-source metadata, one entry per dataset in the manifest.
struct DatasetDescriptor {
  std::string id;
  std::string language;  // ISO 639-1
  Granularity granularity = Granularity::word;
  double scale_min = 0.0;
  double scale_max = 1.0;
  std::string adapter;
  std::string source_uri;
  std::optional<std::string> checksum;  // "fnv1a64:<16 hex>"

  void validate() const;  // throws ConfigError on invariant violations
};

// One text or word with normalized targets and provenance.
struct AnnotatedInstance {
  std::string instance_id;
  std::string dataset_id;
  std::string language;
  Granularity granularity = Granularity::word;
  std::string text;
  double valence = 0.0;  // in [0, 1]
  double arousal = 0.0;  // in [0, 1]
  Fold fold = Fold::unassigned;
};

struct Corpus {
  std::vector<DatasetDescriptor> descriptors;
  std::vector<AnnotatedInstance> instances;

  const DatasetDescriptor* descriptor(const std::string& dataset_id) const;
};

// Raw parse output of one adapter, still on the original rating scale.
struct RawRecord {
  std::string text;
  std::vector<double> valence_ratings;
  std::vector<double> arousal_ratings;
};

struct DimensionStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::array<std::int64_t, 10> histogram{};
};

struct GroupStats {
  std::int64_t count = 0;
  double mean_text_length = 0.0;  // whitespace-delimited words
  DimensionStats valence;
  DimensionStats arousal;
};

struct CorpusStats {
  GroupStats global;
  std::map<std::string, GroupStats> by_dataset;
  std::map<std::string, GroupStats> by_language;
  std::map<std::string, GroupStats> by_granularity;
};

struct QuadFit {
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;
};

}  // namespace vareg::corpus
