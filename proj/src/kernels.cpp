#include "vareg/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vareg::kernels {

namespace {

std::atomic<Backend> g_backend = [] {
  if (const char* env = std::getenv("VAREG_BACKEND")) {
    if (std::strcmp(env, "serial") == 0) return Backend::serial;
  }
#ifdef _OPENMP
  return Backend::openmp;
#else
  return Backend::serial;
#endif
}();

// Parallelism is worth it only above a minimal amount of work, and nested
// regions (e.g. kernels called from a parallel batch loop) stay serial.
[[maybe_unused]] inline bool use_omp(long long work) {
#ifdef _OPENMP
  return g_backend.load(std::memory_order_relaxed) == Backend::openmp &&
         work >= 16384 && !omp_in_parallel();
#else
  (void)work;
  return false;
#endif
}

constexpr double kLayerNormEps = 1e-5;

}  // namespace

Backend backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
#ifndef _OPENMP
  b = Backend::serial;
#endif
  g_backend.store(b, std::memory_order_relaxed);
}

bool openmp_compiled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  const long long work = 1ll * m * k * n;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (int i = 0; i < m; ++i) {
    double* ci = c + 1ll * i * n;
    for (int j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + 1ll * i * k;
    for (int p = 0; p < k; ++p) {
      const double aik = ai[p];
      const double* bp = b + 1ll * p * n;
      for (int j = 0; j < n; ++j) ci[j] += aik * bp[j];
    }
  }
  (void)work;
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  const long long work = 1ll * m * k * n;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (int i = 0; i < m; ++i) {
    const double* ai = a + 1ll * i * k;
    double* ci = c + 1ll * i * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + 1ll * j * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
  (void)work;
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  const long long work = 1ll * m * k * n;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (int i = 0; i < k; ++i) {
    double* ci = c + 1ll * i * n;
    for (int j = 0; j < n; ++j) ci[j] = 0.0;
    for (int p = 0; p < m; ++p) {
      const double api = a[1ll * p * k + i];
      const double* bp = b + 1ll * p * n;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
  (void)work;
}

void matmul_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
  const long long work = 1ll * m * k * n;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (int i = 0; i < k; ++i) {
    double* ci = c + 1ll * i * n;
    for (int p = 0; p < m; ++p) {
      const double api = a[1ll * p * k + i];
      const double* bp = b + 1ll * p * n;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
  (void)work;
}

void add_bias_rows(double* y, const double* bias, int rows, int cols) {
  const long long work = 1ll * rows * cols;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (int i = 0; i < rows; ++i) {
    double* yi = y + 1ll * i * cols;
    for (int j = 0; j < cols; ++j) yi[j] += bias[j];
  }
  (void)work;
}

void col_sums_acc(const double* x, double* out, int rows, int cols) {
  const long long work = 1ll * rows * cols;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (int j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < rows; ++i) acc += x[1ll * i * cols + j];
    out[j] += acc;
  }
  (void)work;
}

void add_inplace(double* a, const double* b, std::size_t n) {
  const long long work = static_cast<long long>(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (long long i = 0; i < static_cast<long long>(n); ++i) a[i] += b[i];
  (void)work;
}

void softmax_rows(double* x, int rows, int cols) {
  const long long work = 1ll * rows * cols * 8;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (int i = 0; i < rows; ++i) {
    double* xi = x + 1ll * i * cols;
    double mx = xi[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, xi[j]);
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) {
      xi[j] = std::exp(xi[j] - mx);
      sum += xi[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < cols; ++j) xi[j] *= inv;
  }
  (void)work;
}

void softmax_rows_backward(const double* y, const double* dy, double* dx,
                           int rows, int cols) {
  const long long work = 1ll * rows * cols * 4;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (int i = 0; i < rows; ++i) {
    const double* yi = y + 1ll * i * cols;
    const double* dyi = dy + 1ll * i * cols;
    double* dxi = dx + 1ll * i * cols;
    double dot = 0.0;
    for (int j = 0; j < cols; ++j) dot += yi[j] * dyi[j];
    for (int j = 0; j < cols; ++j) dxi[j] = yi[j] * (dyi[j] - dot);
  }
  (void)work;
}

void layernorm_forward(const double* x, const double* gain, const double* bias,
                       double* y, double* mean, double* rstd, int rows, int cols) {
  const long long work = 1ll * rows * cols * 4;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (int i = 0; i < rows; ++i) {
    const double* xi = x + 1ll * i * cols;
    double* yi = y + 1ll * i * cols;
    double mu = 0.0;
    for (int j = 0; j < cols; ++j) mu += xi[j];
    mu /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double d = xi[j] - mu;
      var += d * d;
    }
    var /= cols;
    const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
    mean[i] = mu;
    rstd[i] = rs;
    for (int j = 0; j < cols; ++j) yi[j] = gain[j] * ((xi[j] - mu) * rs) + bias[j];
  }
  (void)work;
}

void layernorm_backward(const double* x, const double* gain, const double* mean,
                        const double* rstd, const double* dy, double* dx,
                        double* dgain, double* dbias, int rows, int cols) {
  const long long work = 1ll * rows * cols * 6;
  // dx: independent per row.
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (int i = 0; i < rows; ++i) {
    const double* xi = x + 1ll * i * cols;
    const double* dyi = dy + 1ll * i * cols;
    double* dxi = dx + 1ll * i * cols;
    const double mu = mean[i];
    const double rs = rstd[i];
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double xhat = (xi[j] - mu) * rs;
      const double dxhat = dyi[j] * gain[j];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xhat;
    }
    const double inv_c = 1.0 / cols;
    for (int j = 0; j < cols; ++j) {
      const double xhat = (xi[j] - mu) * rs;
      const double dxhat = dyi[j] * gain[j];
      dxi[j] = rs * (dxhat - inv_c * sum_dxhat - xhat * inv_c * sum_dxhat_xhat);
    }
  }
  // dgain/dbias: independent per column, accumulated over rows.
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (int j = 0; j < cols; ++j) {
    double dg = 0.0;
    double db = 0.0;
    for (int i = 0; i < rows; ++i) {
      const double xhat = (x[1ll * i * cols + j] - mean[i]) * rstd[i];
      const double d = dy[1ll * i * cols + j];
      dg += d * xhat;
      db += d;
    }
    dgain[j] += dg;
    dbias[j] += db;
  }
  (void)work;
}

void gelu_forward(const double* x, double* y, std::size_t n) {
  const long long work = static_cast<long long>(n) * 8;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * M_SQRT1_2));
  }
  (void)work;
}

void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n) {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  const long long work = static_cast<long long>(n) * 10;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(work))
#endif
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    const double cdf = 0.5 * (1.0 + std::erf(x[i] * M_SQRT1_2));
    const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x[i] * x[i]);
    dx[i] = dy[i] * (cdf + x[i] * pdf);
  }
  (void)work;
}

}  // namespace vareg::kernels
