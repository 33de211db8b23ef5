#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vareg/corpus/types.hpp"

namespace vareg::corpus {

// Arithmetic mean of per-annotator ratings on one original scale.
double aggregate_annotations(std::span<const double> ratings);

// Affine map onto [0, 1] using the declared rating-scale endpoints.
double normalize_rating(double x, double scale_min, double scale_max);
double denormalize_rating(double z, double scale_min, double scale_max);

// Builds the merged corpus from per-dataset parses. Aggregates
// annotator ratings, normalizes onto [0, 1], assigns instance ids as
// "<dataset_id>:<row ordinal>" and preserves provenance. Duplicate
// texts across datasets stay independent instances.
Corpus merge_corpus(const std::vector<DatasetDescriptor>& manifest,
                    const std::vector<std::vector<RawRecord>>& parsed);

// Deterministic per-dataset half split. Sizes differ by at most one;
// the odd instance (and the lone instance of a singleton dataset) goes
// to fold A.
void split_folds(Corpus& corpus, std::uint64_t seed);

CorpusStats corpus_stats(const Corpus& corpus);

// Ordinary least squares of arousal on (1, v, v^2). Requires at least
// three distinct valence values, else RankDeficient.
QuadFit quadratic_va_fit(const Corpus& corpus);

// ------------------------------------------------------------------
// File formats (External Interfaces).

std::vector<DatasetDescriptor> load_manifest(const std::filesystem::path& path);

// JSON-lines, one instance per line, fields
// {"instance_id","dataset_id","language","granularity","text",
//  "valence","arousal","fold"}; scores printed with 8 decimal places.
void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_corpus_jsonl(const std::filesystem::path& path);

std::string stats_to_json(const CorpusStats& stats,
                          const std::vector<std::string>& skipped_datasets = {});

// FNV-1a over the raw file bytes; provenance hash for experiment records.
std::uint64_t file_content_hash(const std::filesystem::path& path);

}  // namespace vareg::corpus
