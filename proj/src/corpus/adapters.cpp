#include "vareg/corpus/adapters.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>

#include "vareg/common.hpp"

namespace vareg::corpus {

namespace {

using ParserFn = std::function<std::vector<RawRecord>(const DatasetDescriptor&,
                                                      std::string_view)>;

[[noreturn]] void bad_row(const DatasetDescriptor& d, std::size_t row,
                          const std::string& what) {
  fail(Errc::malformed_row,
       d.id + " row " + std::to_string(row) + ": " + what);
}

double parse_rating(const DatasetDescriptor& d, std::size_t row,
                    std::string_view field) {
  const std::string s = trim(field);
  double value = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end || s.empty())
    bad_row(d, row, "unparseable rating '" + s + "'");
  if (!std::isfinite(value)) bad_row(d, row, "non-finite rating");
  if (value < d.scale_min || value > d.scale_max)
    fail(Errc::out_of_scale_rating,
         d.id + " row " + std::to_string(row) + ": rating " + s +
             " outside declared scale [" + std::to_string(d.scale_min) + ", " +
             std::to_string(d.scale_max) + "]");
  return value;
}

std::string clean_text(const DatasetDescriptor& d, std::size_t row,
                       std::string_view raw) {
  if (!is_valid_utf8(raw)) bad_row(d, row, "text is not valid UTF-8");
  // Source text stays untouched apart from NFC normalization and a
  // whitespace trim, which stable instance ids require.
  const std::string text = nfc_normalize(trim(raw));
  if (text.empty()) bad_row(d, row, "empty text");
  return text;
}

std::vector<std::string_view> split_lines(std::string_view bytes) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= bytes.size()) {
    const std::size_t nl = bytes.find('\n', start);
    std::string_view line = (nl == std::string_view::npos)
                                ? bytes.substr(start)
                                : bytes.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  // drop one trailing blank line from a final newline
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

// RFC-4180-ish field splitting: quoted fields may contain the separator
// and doubled quotes.
std::vector<std::string> split_fields(const DatasetDescriptor& d, std::size_t row,
                                      std::string_view line, char sep) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == sep) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) bad_row(d, row, "unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

std::vector<RawRecord> parse_delimited(const DatasetDescriptor& d,
                                       std::string_view bytes, char sep,
                                       bool has_header, bool multi_rater) {
  const auto lines = split_lines(bytes);
  std::vector<RawRecord> records;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t row = li + 1;
    if (has_header && li == 0) continue;
    if (trim(lines[li]).empty()) continue;
    const auto fields = split_fields(d, row, lines[li], sep);
    RawRecord rec;
    if (multi_rater) {
      if (fields.size() < 3 || (fields.size() - 1) % 2 != 0)
        bad_row(d, row, "expected text followed by valence/arousal pairs");
      rec.text = clean_text(d, row, fields[0]);
      for (std::size_t k = 1; k + 1 < fields.size(); k += 2) {
        rec.valence_ratings.push_back(parse_rating(d, row, fields[k]));
        rec.arousal_ratings.push_back(parse_rating(d, row, fields[k + 1]));
      }
    } else {
      if (fields.size() != 3)
        bad_row(d, row, "expected 3 fields, got " + std::to_string(fields.size()));
      rec.text = clean_text(d, row, fields[0]);
      rec.valence_ratings.push_back(parse_rating(d, row, fields[1]));
      rec.arousal_ratings.push_back(parse_rating(d, row, fields[2]));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<RawRecord> parse_jsonl(const DatasetDescriptor& d,
                                   std::string_view bytes) {
  const auto lines = split_lines(bytes);
  std::vector<RawRecord> records;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t row = li + 1;
    if (trim(lines[li]).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(lines[li]);
    } catch (const nlohmann::json::exception& e) {
      bad_row(d, row, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object() || !obj.contains("text") || !obj.contains("valence") ||
        !obj.contains("arousal"))
      bad_row(d, row, "object must carry text/valence/arousal");
    RawRecord rec;
    rec.text = clean_text(d, row, obj.at("text").get<std::string>());
    auto read_dim = [&](const char* key, std::vector<double>& out) {
      const auto& v = obj.at(key);
      if (v.is_number()) {
        out.push_back(v.get<double>());
      } else if (v.is_array() && !v.empty()) {
        for (const auto& e : v) out.push_back(e.get<double>());
      } else {
        bad_row(d, row, std::string(key) + " must be a number or array");
      }
      for (double x : out)
        if (x < d.scale_min || x > d.scale_max)
          fail(Errc::out_of_scale_rating,
               d.id + " row " + std::to_string(row) + ": rating outside scale");
    };
    read_dim("valence", rec.valence_ratings);
    read_dim("arousal", rec.arousal_ratings);
    records.push_back(std::move(rec));
  }
  return records;
}

const std::map<std::string, ParserFn>& adapter_table() {
  static const std::map<std::string, ParserFn> table = {
      {"csv_va",
       [](const DatasetDescriptor& d, std::string_view b) {
         return parse_delimited(d, b, ',', /*has_header=*/true, false);
       }},
      {"tsv_va",
       [](const DatasetDescriptor& d, std::string_view b) {
         return parse_delimited(d, b, '\t', /*has_header=*/false, false);
       }},
      {"csv_va_raters",
       [](const DatasetDescriptor& d, std::string_view b) {
         return parse_delimited(d, b, ',', /*has_header=*/true, true);
       }},
      {"jsonl_va", parse_jsonl},
  };
  return table;
}

}  // namespace

std::vector<std::string> registered_adapters() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : adapter_table()) names.push_back(name);
  return names;
}

bool adapter_is_registered(const std::string& name) {
  return adapter_table().count(name) != 0;
}

std::vector<RawRecord> parse_dataset(const DatasetDescriptor& descriptor,
                                     std::string_view raw_bytes) {
  descriptor.validate();
  const auto it = adapter_table().find(descriptor.adapter);
  if (it == adapter_table().end())
    fail(Errc::unknown_adapter,
         "'" + descriptor.adapter + "' requested by dataset " + descriptor.id);
  if (descriptor.checksum) {
    const std::string expected = *descriptor.checksum;
    const std::string got =
        "fnv1a64:" + to_hex64(fnv1a64(raw_bytes.data(), raw_bytes.size()));
    if (expected != got)
      fail(Errc::checksum_mismatch,
           descriptor.id + ": expected " + expected + ", file hashes to " + got);
  }
  auto records = it->second(descriptor, raw_bytes);
  if (records.empty())
    fail(Errc::malformed_row, descriptor.id + ": dataset holds no records");
  return records;
}

}  // namespace vareg::corpus
