#pragma once

#include <vector>

#include "vareg/mat.hpp"
#include "vareg/model/encoder.hpp"

namespace vareg::train {

// Decoupled-weight-decay Adam. Decay applies only to tensors flagged
// weight_decay (biases and normalization parameters stay undecayed).
class AdamW {
 public:
  struct Config {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW(std::vector<model::Tensor*> targets, Config cfg);

  // grads[i] mirrors targets[i]'s shape.
  void step(const std::vector<const Mat*>& grads, double lr);
  long long step_count() const { return t_; }

 private:
  std::vector<model::Tensor*> targets_;
  Config cfg_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  long long t_ = 0;
};

}  // namespace vareg::train
