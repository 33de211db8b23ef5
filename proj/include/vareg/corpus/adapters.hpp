#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vareg/corpus/types.hpp"

namespace vareg::corpus {

// Parses one dataset's raw bytes with the adapter named in the
// descriptor. Records keep the original rating scale; ratings outside
// [scale_min, scale_max] raise OutOfScaleRating, undecodable or
// structurally broken rows raise MalformedRow with the row number.
//
// Registered adapters:
//   csv_va          header "text,valence,arousal" (or word,...), one
//                   pre-aggregated rating pair per row
//   tsv_va          same layout, tab separated, no header
//   csv_va_raters   header row, then text followed by one v,a pair per
//                   annotator: text,v1,a1,v2,a2,...
//   jsonl_va        one JSON object per line: {"text","valence","arousal"}
std::vector<RawRecord> parse_dataset(const DatasetDescriptor& descriptor,
                                     std::string_view raw_bytes);

std::vector<std::string> registered_adapters();
bool adapter_is_registered(const std::string& name);

}  // namespace vareg::corpus
