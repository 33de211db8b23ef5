#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vareg/mat.hpp"
#include "vareg/model/encoder.hpp"

namespace vareg::model {

// Saturating piecewise-linear squash onto [0, 1]:
// clamp(slope * x + 0.5, 0, 1); slope defaults to 0.2.
double hard_sigmoid(double x, double slope = 0.2);
// 0 in the saturated regions, slope inside.
double hard_sigmoid_grad(double x, double slope = 0.2);

struct VAPrediction {
  double valence = 0.0;
  double arousal = 0.0;
};

// Two-output linear regression head over the pooled representation.
// Output order is fixed: index 0 valence, index 1 arousal.
struct RegressionHead {
  Mat weight;                     // [2 x hidden]
  std::array<double, 2> bias{};   // zero init keeps training start at (0.5, 0.5)

  explicit RegressionHead(int hidden = 0) : weight(2, hidden) {}

  VAPrediction forward(std::span<const double> pooled, double slope = 0.2) const;
  // Raw pre-activation logits, needed for the training-time gradient.
  std::array<double, 2> logits(std::span<const double> pooled) const;
};

// Inference over a batch of texts: hard_sigmoid(head(encode_pool(texts))).
std::vector<VAPrediction> predict_batch(std::span<const std::string> texts,
                                        const Encoder& encoder,
                                        const RegressionHead& head,
                                        double slope = 0.2);

// ------------------------------------------------------------------
// Exported predictor artifact: a directory with encoder weights, head
// weights and a JSON metadata file.

struct Predictor {
  Encoder encoder;
  RegressionHead head;
  double hard_sigmoid_slope = 0.2;

  Predictor(Encoder enc, RegressionHead h, double slope)
      : encoder(std::move(enc)), head(std::move(h)), hard_sigmoid_slope(slope) {}

  std::vector<VAPrediction> predict(std::span<const std::string> texts) const {
    return predict_batch(texts, encoder, head, hard_sigmoid_slope);
  }
};

void save_predictor(const Predictor& predictor, const std::filesystem::path& dir);
Predictor load_predictor(const std::filesystem::path& dir);

}  // namespace vareg::model
