#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "vareg/common.hpp"
#include "vareg/model/encoder.hpp"
#include "vareg/model/head.hpp"
#include "vareg/model/tokenizer.hpp"

using namespace vareg;
using namespace vareg::model;

TEST_CASE("hard sigmoid values and shape") {
  CHECK(hard_sigmoid(0.0) == 0.5);
  CHECK(hard_sigmoid(-10.0) == 0.0);
  CHECK(hard_sigmoid(10.0) == 1.0);
  CHECK(hard_sigmoid(1.0) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(hard_sigmoid(-2.5) == 0.0);
  CHECK(hard_sigmoid(2.5) == 1.0);

  // monotone, 0.2-Lipschitz
  double prev = hard_sigmoid(-4.0);
  for (double x = -3.99; x <= 4.0; x += 0.01) {
    const double y = hard_sigmoid(x);
    CHECK(y >= prev);
    CHECK(y - prev <= 0.2 * 0.01 + 1e-12);
    prev = y;
  }
  CHECK(hard_sigmoid_grad(0.0) == 0.2);
  CHECK(hard_sigmoid_grad(3.0) == 0.0);
  CHECK(hard_sigmoid_grad(-3.0) == 0.0);
}

TEST_CASE("tokenizer splits whitespace and cjk, truncates, hashes stably") {
  const auto t1 = tokenize("hello world", 4096, 64);
  CHECK(t1.ids.size() == 3);  // pooling token + 2 words
  CHECK(t1.ids[0] == 0);
  CHECK(!t1.truncated);
  for (std::size_t i = 1; i < t1.ids.size(); ++i) {
    CHECK(t1.ids[i] >= 1);
    CHECK(t1.ids[i] < 4096);
  }

  // same text, same ids
  const auto t2 = tokenize("hello world", 4096, 64);
  CHECK(t1.ids == t2.ids);
  // different word, different id (with overwhelming probability)
  const auto t3 = tokenize("hello earth", 4096, 64);
  CHECK(t3.ids[2] != t1.ids[2]);

  // cjk codepoints split individually
  const auto cjk = tokenize("\xe6\x88\x91\xe4\xbb\xac", 4096, 64);  // two hanzi
  CHECK(cjk.ids.size() == 3);

  // mixed script
  const auto mixed = tokenize("abc \xe6\x88\x91 def", 4096, 64);
  CHECK(mixed.ids.size() == 4);

  // truncation
  std::string longtext;
  for (int i = 0; i < 100; ++i) longtext += "w" + std::to_string(i) + " ";
  const auto trunc = tokenize(longtext, 4096, 16);
  CHECK(trunc.ids.size() == 16);
  CHECK(trunc.truncated);

  CHECK_THROWS_AS(tokenize("   ", 4096, 64), ToolkitError);
  CHECK_THROWS_AS(tokenize("", 4096, 64), ToolkitError);
}

TEST_CASE("checkpoint registry resolves desk families and rejects unknowns") {
  const auto enc = Encoder::from_checkpoint("desk-distilled-base");
  CHECK(enc.arch().hidden == 256);
  CHECK(enc.spec().hidden_size == 256);
  CHECK(enc.family() == Family::distilled_base);

  // deterministic initialization: same id, same weights
  const auto enc2 = Encoder::from_checkpoint("desk-distilled-base");
  const auto& a = enc.params().get("tok_embed").value;
  const auto& b = enc2.params().get("tok_embed").value;
  bool identical = a.raw() == b.raw();
  CHECK(identical);
  // different id, different weights
  const auto enc3 = Encoder::from_checkpoint("desk-base");
  CHECK(enc3.arch().hidden == 320);

  CHECK_THROWS_AS(Encoder::from_checkpoint("no-such-model"), ToolkitError);
  // published architectures need user-supplied weights
  CHECK_THROWS_AS(Encoder::from_checkpoint("xlm-roberta-large"), ToolkitError);

  CHECK(checkpoint_for_family(Family::large, true) == "desk-large");
  CHECK(checkpoint_for_family(Family::large, false) == "xlm-roberta-large");
}

TEST_CASE("encode_pool shape, determinism and truncation contract") {
  const auto enc = Encoder::from_checkpoint("desk-distilled-base");
  const std::vector<std::string> texts{"one two three", "one two three",
                                       "totally different words"};
  const Mat pooled = enc.encode_pool(texts);
  CHECK(pooled.rows() == 3);
  CHECK(pooled.cols() == enc.arch().hidden);

  // identical texts give identical rows
  for (int j = 0; j < pooled.cols(); ++j)
    CHECK(pooled(0, j) == pooled(1, j));

  // batch of one equals the same row of a larger batch
  const Mat single = enc.encode_pool(std::vector<std::string>{texts[2]});
  for (int j = 0; j < pooled.cols(); ++j)
    CHECK(single(0, j) == pooled(2, j));

  // a text longer than the window encodes like its truncated prefix
  std::string longtext, prefix;
  const int max_words = enc.arch().max_sequence_length - 1;
  for (int i = 0; i < max_words + 40; ++i) {
    longtext += "w" + std::to_string(i) + " ";
    if (i < max_words) prefix += "w" + std::to_string(i) + " ";
  }
  const auto before = enc.truncation_count();
  const Mat lp = enc.encode_pool(std::vector<std::string>{longtext, prefix});
  CHECK(enc.truncation_count() == before + 1);
  for (int j = 0; j < lp.cols(); ++j) CHECK(lp(0, j) == lp(1, j));
}

TEST_CASE("predictions stay in the unit square for arbitrary heads and inputs") {
  const auto enc = Encoder::from_checkpoint("desk-distilled-base");
  std::mt19937_64 rng(31);
  std::normal_distribution<double> wild(0.0, 50.0);
  RegressionHead head(enc.arch().hidden);
  for (auto& w : head.weight.raw()) w = wild(rng);
  head.bias = {wild(rng), wild(rng)};

  const std::vector<std::string> texts{
      "plain ascii",
      "\xf0\x9f\x98\x80 \xf0\x9f\x98\xa1 emoji only",
      "\xe6\x88\x91\xe4\xbb\xac\xe5\xbe\x88\xe9\xab\x98\xe5\x85\xb4",
      "mixed \xc3\xa9\xc3\xa0\xc3\xbc latin-1 accents",
      "x",
  };
  const auto preds = predict_batch(texts, enc, head);
  REQUIRE(preds.size() == texts.size());
  for (const auto& p : preds) {
    CHECK(p.valence >= 0.0);
    CHECK(p.valence <= 1.0);
    CHECK(p.arousal >= 0.0);
    CHECK(p.arousal <= 1.0);
  }

  // zero head: every prediction is exactly the center
  RegressionHead zero(enc.arch().hidden);
  const auto centered = predict_batch(texts, enc, zero);
  for (const auto& p : centered) {
    CHECK(p.valence == 0.5);
    CHECK(p.arousal == 0.5);
  }
}

TEST_CASE("head plus activation gradient matches finite differences") {
  const int hidden = 16;
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> unit(-0.3, 0.3);
  RegressionHead head(hidden);
  for (auto& w : head.weight.raw()) w = unit(rng);
  head.bias = {0.05, -0.05};
  std::vector<double> pooled(hidden);
  for (auto& x : pooled) x = unit(rng);

  // objective: (hs(z0) - 0.3)^2 + (hs(z1) - 0.7)^2, gradient wrt weights
  const auto objective = [&](const RegressionHead& h) {
    const auto p = h.forward(pooled);
    return (p.valence - 0.3) * (p.valence - 0.3) +
           (p.arousal - 0.7) * (p.arousal - 0.7);
  };
  const auto z = head.logits(pooled);
  const auto p = head.forward(pooled);
  const double dz0 = 2.0 * (p.valence - 0.3) * hard_sigmoid_grad(z[0]);
  const double dz1 = 2.0 * (p.arousal - 0.7) * hard_sigmoid_grad(z[1]);

  const double h = 1e-6;
  for (int j = 0; j < hidden; j += 3) {
    for (int d = 0; d < 2; ++d) {
      RegressionHead hp = head, hm = head;
      hp.weight(d, j) += h;
      hm.weight(d, j) -= h;
      const double fd = (objective(hp) - objective(hm)) / (2 * h);
      const double analytic = (d == 0 ? dz0 : dz1) * pooled[j];
      CHECK(std::abs(analytic - fd) <=
            1e-4 * std::max({std::abs(analytic), std::abs(fd), 1e-6}));
    }
  }
}

TEST_CASE("encoder backward matches finite differences across all tensors") {
  const auto enc = Encoder::from_checkpoint("desk-distilled-base");
  std::mt19937_64 rng(41);
  const auto tok = enc.tokenize_text("alpha beta gamma delta eps");
  const int H = enc.arch().hidden;

  // objective: dot(pooled, w) for a fixed random direction w
  std::vector<double> w(H);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (auto& x : w) x = unit(rng);

  const auto objective = [&](const Encoder& e) {
    const auto tr = e.forward(tok.ids);
    double f = 0.0;
    for (int j = 0; j < H; ++j) f += tr.encoded(0, j) * w[j];
    return f;
  };

  auto grads = enc.params().zeros_like();
  const auto trace = enc.forward(tok.ids);
  enc.backward(trace, w, grads);

  Encoder probe = enc;  // mutated copy for finite differences
  const double h = 1e-5;
  int checked = 0;
  for (auto& tensor : probe.params().tensors()) {
    auto& values = tensor.value.raw();
    const auto& g = grads.get(tensor.name).value.raw();
    // a few coordinates per tensor; embeddings only where tokens hit
    std::vector<std::size_t> indices;
    if (tensor.name == "tok_embed") {
      for (int rep = 0; rep < 3; ++rep) {
        const int t = 1 + static_cast<int>(rng() % (tok.ids.size() - 1));
        indices.push_back(static_cast<std::size_t>(tok.ids[t]) * H + rng() % H);
      }
    } else if (tensor.name == "pos_embed") {
      for (int rep = 0; rep < 3; ++rep)
        indices.push_back((rng() % tok.ids.size()) * H + rng() % H);
    } else {
      for (int rep = 0; rep < 3; ++rep) indices.push_back(rng() % values.size());
    }
    for (const auto idx : indices) {
      const double keep = values[idx];
      values[idx] = keep + h;
      const double fp = objective(probe);
      values[idx] = keep - h;
      const double fm = objective(probe);
      values[idx] = keep;
      const double fd = (fp - fm) / (2 * h);
      const double analytic = g[idx];
      // the 1e-5 floor keeps near-zero coordinates above the cancellation
      // noise of the central difference
      CHECK(std::abs(analytic - fd) <=
            1e-4 * std::max({std::abs(analytic), std::abs(fd), 1e-5}));
      ++checked;
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("predictor artifact round trips through disk") {
  namespace fs = std::filesystem;
  const auto enc = Encoder::from_checkpoint("desk-distilled-base");
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> unit(-0.2, 0.2);
  RegressionHead head(enc.arch().hidden);
  for (auto& w : head.weight.raw()) w = unit(rng);
  head.bias = {0.03, -0.08};
  const Predictor predictor(enc, head, 0.2);

  const std::vector<std::string> texts{"round trip check", "second line"};
  const auto before = predictor.predict(texts);

  const fs::path dir = fs::temp_directory_path() / "vareg_artifact_test";
  fs::remove_all(dir);
  save_predictor(predictor, dir);
  CHECK(fs::exists(dir / "encoder.bin"));
  CHECK(fs::exists(dir / "head.bin"));
  CHECK(fs::exists(dir / "metadata.json"));

  const auto loaded = load_predictor(dir);
  CHECK(loaded.encoder.checkpoint_id() == "desk-distilled-base");
  const auto after = loaded.predict(texts);
  REQUIRE(after.size() == before.size());
  for (std::size_t i = 0; i < after.size(); ++i) {
    CHECK(after[i].valence == before[i].valence);
    CHECK(after[i].arousal == before[i].arousal);
  }
  fs::remove_all(dir);

  CHECK_THROWS_AS(load_predictor(fs::temp_directory_path() / "nonexistent_artifact"),
                  ToolkitError);
}
