#include "vareg/model/head.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "vareg/common.hpp"

namespace vareg::model {

double hard_sigmoid(double x, double slope) {
  const double y = slope * x + 0.5;
  if (y <= 0.0) return 0.0;
  if (y >= 1.0) return 1.0;
  return y;
}

double hard_sigmoid_grad(double x, double slope) {
  const double y = slope * x + 0.5;
  return (y > 0.0 && y < 1.0) ? slope : 0.0;
}

std::array<double, 2> RegressionHead::logits(std::span<const double> pooled) const {
  std::array<double, 2> z{bias[0], bias[1]};
  for (int d = 0; d < 2; ++d) {
    const double* w = weight.row(d);
    double acc = 0.0;
    for (int j = 0; j < weight.cols(); ++j) acc += w[j] * pooled[j];
    z[d] += acc;
  }
  return z;
}

VAPrediction RegressionHead::forward(std::span<const double> pooled,
                                     double slope) const {
  const auto z = logits(pooled);
  return {hard_sigmoid(z[0], slope), hard_sigmoid(z[1], slope)};
}

std::vector<VAPrediction> predict_batch(std::span<const std::string> texts,
                                        const Encoder& encoder,
                                        const RegressionHead& head, double slope) {
  if (head.weight.cols() != encoder.arch().hidden)
    fail(Errc::config_error, "head width does not match encoder hidden size");
  const Mat pooled = encoder.encode_pool(texts);
  std::vector<VAPrediction> out(texts.size());
  for (int i = 0; i < pooled.rows(); ++i)
    out[i] = head.forward(std::span(pooled.row(i), pooled.cols()), slope);
  return out;
}

void save_predictor(const Predictor& predictor, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  predictor.encoder.save(dir / "encoder.bin");

  std::ofstream head_out(dir / "head.bin", std::ios::binary);
  if (!head_out) fail(Errc::io_error, "cannot write head weights");
  const int hidden = predictor.head.weight.cols();
  head_out.write(reinterpret_cast<const char*>(&hidden), sizeof hidden);
  head_out.write(reinterpret_cast<const char*>(predictor.head.weight.data()),
                 static_cast<std::streamsize>(2 * hidden * sizeof(double)));
  head_out.write(reinterpret_cast<const char*>(predictor.head.bias.data()),
                 2 * sizeof(double));

  nlohmann::ordered_json meta;
  meta["checkpoint_id"] = predictor.encoder.checkpoint_id();
  meta["family"] = family_to_string(predictor.encoder.family());
  meta["hidden_size"] = predictor.encoder.arch().hidden;
  meta["max_sequence_length"] = predictor.encoder.arch().max_sequence_length;
  meta["hard_sigmoid_slope"] = predictor.hard_sigmoid_slope;
  meta["output_order"] = {"valence", "arousal"};
  std::ofstream meta_out(dir / "metadata.json");
  meta_out << meta.dump(2) << "\n";
}

Predictor load_predictor(const std::filesystem::path& dir) {
  const auto meta_path = dir / "metadata.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) fail(Errc::io_error, "missing artifact metadata " + meta_path.string());
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::io_error, std::string("bad artifact metadata: ") + e.what());
  }

  Encoder encoder = Encoder::load(dir / "encoder.bin");

  std::ifstream head_in(dir / "head.bin", std::ios::binary);
  if (!head_in) fail(Errc::io_error, "missing head weights in " + dir.string());
  int hidden = 0;
  head_in.read(reinterpret_cast<char*>(&hidden), sizeof hidden);
  if (hidden != encoder.arch().hidden)
    fail(Errc::io_error, "head/encoder width mismatch in artifact");
  RegressionHead head(hidden);
  head_in.read(reinterpret_cast<char*>(head.weight.data()),
               static_cast<std::streamsize>(2 * hidden * sizeof(double)));
  head_in.read(reinterpret_cast<char*>(head.bias.data()), 2 * sizeof(double));
  if (!head_in) fail(Errc::io_error, "short read on head weights");

  const double slope = meta.value("hard_sigmoid_slope", 0.2);
  return Predictor(std::move(encoder), std::move(head), slope);
}

}  // namespace vareg::model
