#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace vareg {

// Dense row-major matrix of doubles. Deliberately minimal: the compute
// kernels operate on raw pointers so that the serial and OpenMP paths can
// share one call signature.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols) : rows_(rows), cols_(cols) {
    v_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  double* row(int r) { return v_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row(int r) const {
    return v_.data() + static_cast<std::size_t>(r) * cols_;
  }

  double& operator()(int r, int c) {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return v_[static_cast<std::size_t>(r) * cols_ + c];
  }
  double operator()(int r, int c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return v_[static_cast<std::size_t>(r) * cols_ + c];
  }

  void fill(double x) { v_.assign(v_.size(), x); }

  std::vector<double>& raw() { return v_; }
  const std::vector<double>& raw() const { return v_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> v_;
};

}  // namespace vareg
