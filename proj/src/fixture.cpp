#include "vareg/fixture.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "vareg/common.hpp"

namespace vareg::fixture {

namespace {

struct Word {
  std::string text;
  double valence;  // latent, in [0, 1]
  double arousal;
};

struct LanguageSpec {
  const char* code;
  const char* consonants;
  const char* vowels;
};

std::vector<Word> make_vocabulary(const LanguageSpec& lang, int count,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> latent(0.02, 0.98);
  const std::string cons = lang.consonants;
  const std::string vows = lang.vowels;
  std::set<std::string> seen;
  std::vector<Word> vocab;
  while (static_cast<int>(vocab.size()) < count) {
    const int syllables = 2 + static_cast<int>(rng() % 2);
    std::string w;
    for (int s = 0; s < syllables; ++s) {
      w.push_back(cons[rng() % cons.size()]);
      w.push_back(vows[rng() % vows.size()]);
    }
    if (!seen.insert(w).second) continue;
    vocab.push_back({w, latent(rng), latent(rng)});
  }
  return vocab;
}

std::string format_rating(double normalized, double lo, double hi) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", lo + normalized * (hi - lo));
  // keep quantized values inside the declared scale
  double v = std::strtod(buf, nullptr);
  v = std::clamp(v, lo, hi);
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

void write_fixture(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(fnv1a64("vareg-fixture-v1"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const LanguageSpec languages[3] = {
      {"aa", "kmts", "aiou"},
      {"bb", "bdgn", "aeio"},
      {"cc", "plrv", "aeuy"},
  };
  // one (scale, adapter) pairing per file, exercising every adapter
  struct FilePlan {
    double lo, hi;
    const char* words_adapter;
    double tlo, thi;
    const char* texts_adapter;
  };
  const FilePlan plans[3] = {
      {1.0, 9.0, "csv_va", -3.0, 3.0, "tsv_va"},
      {1.0, 7.0, "csv_va_raters", 0.0, 1.0, "jsonl_va"},
      {1.0, 5.0, "csv_va", -100.0, 100.0, "csv_va"},
  };

  std::string manifest = "[\n";
  bool first_entry = true;
  const auto add_entry = [&](const std::string& id, const char* language,
                             const char* granularity, double lo, double hi,
                             const char* adapter, const std::string& file) {
    if (!first_entry) manifest += ",\n";
    first_entry = false;
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "  {\"id\": \"%s\", \"language\": \"%s\", \"granularity\": "
                  "\"%s\", \"scale_min\": %g, \"scale_max\": %g, \"adapter\": "
                  "\"%s\", \"source_uri\": \"%s\"}",
                  id.c_str(), language, granularity, lo, hi, adapter,
                  file.c_str());
    manifest += buf;
  };

  for (int li = 0; li < 3; ++li) {
    const auto& lang = languages[li];
    const auto& plan = plans[li];
    // compact vocabularies keep the word-to-score map learnable within
    // the two-epoch desk recipe while the linear baseline stays strong
    const auto vocab = make_vocabulary(lang, 32, rng);

    // ---- word lexicon: every vocabulary word once
    const std::string words_id = std::string("fx_words_") + lang.code;
    const std::string words_file = words_id + ".csv";
    {
      std::ofstream out(dir / words_file, std::ios::binary);
      if (std::string(plan.words_adapter) == "csv_va_raters") {
        out << "text,v1,a1,v2,a2,v3,a3\n";
        std::uniform_real_distribution<double> jitter(-0.05, 0.05);
        for (const auto& w : vocab) {
          out << w.text;
          for (int r = 0; r < 3; ++r) {
            const double v = clamp01(w.valence + jitter(rng));
            const double a = clamp01(w.arousal + jitter(rng));
            out << ',' << format_rating(v, plan.lo, plan.hi) << ','
                << format_rating(a, plan.lo, plan.hi);
          }
          out << '\n';
        }
      } else {
        out << "text,valence,arousal\n";
        for (const auto& w : vocab)
          out << w.text << ',' << format_rating(w.valence, plan.lo, plan.hi)
              << ',' << format_rating(w.arousal, plan.lo, plan.hi) << '\n';
      }
    }
    add_entry(words_id, lang.code, "word", plan.lo, plan.hi, plan.words_adapter,
              words_file);

    // ---- short texts: words sampled from the vocabulary, target is the
    // mean of the word latents plus small noise
    const std::string texts_id = std::string("fx_texts_") + lang.code;
    std::string texts_file;
    const std::string texts_adapter = plan.texts_adapter;
    if (texts_adapter == "tsv_va") texts_file = texts_id + ".tsv";
    else if (texts_adapter == "jsonl_va") texts_file = texts_id + ".jsonl";
    else texts_file = texts_id + ".csv";
    {
      std::ofstream out(dir / texts_file, std::ios::binary);
      std::normal_distribution<double> noise(0.0, 0.01);
      for (int t = 0; t < 170; ++t) {
        const int len = 3 + static_cast<int>(rng() % 5);
        std::string text;
        double v_sum = 0.0, a_sum = 0.0;
        for (int k = 0; k < len; ++k) {
          const auto& w = vocab[rng() % vocab.size()];
          if (k > 0) text += ' ';
          text += w.text;
          v_sum += w.valence;
          a_sum += w.arousal;
        }
        const double v = clamp01(v_sum / len + noise(rng));
        const double a = clamp01(a_sum / len + noise(rng));
        if (texts_adapter == "tsv_va") {
          out << text << '\t' << format_rating(v, plan.tlo, plan.thi) << '\t'
              << format_rating(a, plan.tlo, plan.thi) << '\n';
        } else if (texts_adapter == "jsonl_va") {
          out << "{\"text\": \"" << text
              << "\", \"valence\": " << format_rating(v, plan.tlo, plan.thi)
              << ", \"arousal\": " << format_rating(a, plan.tlo, plan.thi)
              << "}\n";
        } else {
          if (t == 0) out << "text,valence,arousal\n";
          out << text << ',' << format_rating(v, plan.tlo, plan.thi) << ','
              << format_rating(a, plan.tlo, plan.thi) << '\n';
        }
      }
    }
    add_entry(texts_id, lang.code, "short_text", plan.tlo, plan.thi,
              plan.texts_adapter, texts_file);
  }

  manifest += "\n]\n";
  std::ofstream mf(dir / "manifest.json", std::ios::binary);
  mf << manifest;
}

}  // namespace vareg::fixture
