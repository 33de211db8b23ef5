#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "vareg/kernels.hpp"

namespace ker = vareg::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng,
                               double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

// Runs fn under both backends and requires bitwise identical output.
template <typename Fn>
void check_backends_agree(Fn&& fn, std::vector<double>& out) {
  ker::set_backend(ker::Backend::serial);
  fn();
  const std::vector<double> serial = out;
  ker::set_backend(ker::Backend::openmp);
  fn();
  ker::set_backend(ker::Backend::openmp);
  REQUIRE(serial.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // exact: both backends compute every element in the same order
    REQUIRE(serial[i] == out[i]);
  }
}

}  // namespace

TEST_CASE("matmul variants match a naive triple loop") {
  std::mt19937_64 rng(1);
  const int m = 7, k = 5, n = 9;
  const auto a = random_vec(m * k, rng);
  const auto b_nn = random_vec(k * n, rng);
  std::vector<double> c(m * n);
  ker::matmul_nn(a.data(), b_nn.data(), c.data(), m, k, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b_nn[p * n + j];
      CHECK(c[i * n + j] == doctest::Approx(acc).epsilon(1e-12));
    }

  const auto b_nt = random_vec(n * k, rng);
  ker::matmul_nt(a.data(), b_nt.data(), c.data(), m, k, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b_nt[j * k + p];
      CHECK(c[i * n + j] == doctest::Approx(acc).epsilon(1e-12));
    }

  const auto b_tn = random_vec(m * n, rng);
  std::vector<double> c_tn(k * n, 0.5);
  ker::matmul_tn(a.data(), b_tn.data(), c_tn.data(), m, k, n);
  std::vector<double> c_acc(k * n, 0.25);
  ker::matmul_tn_acc(a.data(), b_tn.data(), c_acc.data(), m, k, n);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < m; ++p) acc += a[p * k + i] * b_tn[p * n + j];
      CHECK(c_tn[i * n + j] == doctest::Approx(acc).epsilon(1e-12));
      CHECK(c_acc[i * n + j] == doctest::Approx(acc + 0.25).epsilon(1e-12));
    }
}

TEST_CASE("serial and openmp backends produce bitwise identical results") {
  std::mt19937_64 rng(7);
  // big enough to clear the parallelization threshold
  const int m = 96, k = 64, n = 80;
  const auto a = random_vec(m * k, rng);
  const auto b = random_vec(k * n, rng);
  std::vector<double> c(m * n);
  check_backends_agree(
      [&] { ker::matmul_nn(a.data(), b.data(), c.data(), m, k, n); }, c);

  const int rows = 64, cols = 96;
  const auto x = random_vec(rows * cols, rng);
  const auto gain = random_vec(cols, rng, 0.5, 1.5);
  const auto bias = random_vec(cols, rng);
  std::vector<double> y(rows * cols), mean(rows), rstd(rows);
  check_backends_agree(
      [&] {
        ker::layernorm_forward(x.data(), gain.data(), bias.data(), y.data(),
                               mean.data(), rstd.data(), rows, cols);
      },
      y);

  std::vector<double> soft(rows * cols);
  check_backends_agree(
      [&] {
        soft = x;
        ker::softmax_rows(soft.data(), rows, cols);
      },
      soft);

  std::vector<double> g(rows * cols);
  check_backends_agree(
      [&] { ker::gelu_forward(x.data(), g.data(), x.size()); }, g);
}

TEST_CASE("softmax rows sum to one and backward matches finite differences") {
  std::mt19937_64 rng(3);
  const int rows = 4, cols = 6;
  auto x = random_vec(rows * cols, rng, -3.0, 3.0);
  auto y = x;
  ker::softmax_rows(y.data(), rows, cols);
  for (int i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) sum += y[i * cols + j];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  // scalar objective: dot(y, w); gradient wrt x via the kernel
  const auto w = random_vec(rows * cols, rng);
  std::vector<double> dx(rows * cols);
  ker::softmax_rows_backward(y.data(), w.data(), dx.data(), rows, cols);
  const double h = 1e-6;
  for (int idx = 0; idx < rows * cols; idx += 5) {
    auto xp = x, xm = x;
    xp[idx] += h;
    xm[idx] -= h;
    ker::softmax_rows(xp.data(), rows, cols);
    ker::softmax_rows(xm.data(), rows, cols);
    double fp = 0.0, fm = 0.0;
    for (int j = 0; j < rows * cols; ++j) {
      fp += xp[j] * w[j];
      fm += xm[j] * w[j];
    }
    const double fd = (fp - fm) / (2 * h);
    CHECK(dx[idx] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("layernorm backward matches finite differences") {
  std::mt19937_64 rng(5);
  const int rows = 3, cols = 8;
  const auto x = random_vec(rows * cols, rng);
  const auto gain = random_vec(cols, rng, 0.5, 1.5);
  const auto bias = random_vec(cols, rng);
  const auto w = random_vec(rows * cols, rng);  // objective weights

  const auto objective = [&](const std::vector<double>& input) {
    std::vector<double> y(rows * cols), mean(rows), rstd(rows);
    ker::layernorm_forward(input.data(), gain.data(), bias.data(), y.data(),
                           mean.data(), rstd.data(), rows, cols);
    double f = 0.0;
    for (int j = 0; j < rows * cols; ++j) f += y[j] * w[j];
    return f;
  };

  std::vector<double> y(rows * cols), mean(rows), rstd(rows);
  ker::layernorm_forward(x.data(), gain.data(), bias.data(), y.data(), mean.data(),
                         rstd.data(), rows, cols);
  std::vector<double> dx(rows * cols), dgain(cols, 0.0), dbias(cols, 0.0);
  ker::layernorm_backward(x.data(), gain.data(), mean.data(), rstd.data(), w.data(),
                          dx.data(), dgain.data(), dbias.data(), rows, cols);

  const double h = 1e-6;
  for (int idx = 0; idx < rows * cols; idx += 3) {
    auto xp = x, xm = x;
    xp[idx] += h;
    xm[idx] -= h;
    const double fd = (objective(xp) - objective(xm)) / (2 * h);
    CHECK(dx[idx] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("gelu derivative matches finite differences") {
  for (const double x : {-3.0, -1.0, -0.1, 0.0, 0.2, 1.5, 4.0}) {
    double y = 0.0, dy = 1.0, dx = 0.0;
    ker::gelu_backward(&x, &dy, &dx, 1);
    const double h = 1e-6;
    double yp, ym;
    const double xp = x + h, xm = x - h;
    ker::gelu_forward(&xp, &yp, 1);
    ker::gelu_forward(&xm, &ym, 1);
    (void)y;
    CHECK(dx == doctest::Approx((yp - ym) / (2 * h)).epsilon(1e-6));
  }
}
