#include "vareg/train/optimizer.hpp"

#include <cmath>

#include "vareg/common.hpp"

namespace vareg::train {

AdamW::AdamW(std::vector<model::Tensor*> targets, Config cfg)
    : targets_(std::move(targets)), cfg_(cfg) {
  m_.reserve(targets_.size());
  v_.reserve(targets_.size());
  for (const auto* t : targets_) {
    m_.emplace_back(t->value.rows(), t->value.cols());
    v_.emplace_back(t->value.rows(), t->value.cols());
  }
}

void AdamW::step(const std::vector<const Mat*>& grads, double lr) {
  if (grads.size() != targets_.size())
    fail(Errc::config_error, "gradient list does not match optimizer targets");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < targets_.size(); ++i) {
    auto& theta = targets_[i]->value.raw();
    const auto& g = grads[i]->raw();
    auto& m = m_[i].raw();
    auto& v = v_[i].raw();
    const double wd = targets_[i]->weight_decay ? cfg_.weight_decay : 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      theta[j] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + wd * theta[j]);
    }
  }
}

}  // namespace vareg::train
