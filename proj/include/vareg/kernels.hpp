#pragma once

#include <cstddef>

namespace vareg::kernels {

// All kernels exist in two implementations: a plain serial loop (the
// reference) and an OpenMP one parallelized over independent output rows
// or columns. Because every output element is produced by exactly one
// thread with the same inner-loop order as the serial code, the two
// backends produce bitwise-identical results; the test suite asserts
// exact equality on random inputs.
enum class Backend { serial, openmp };

Backend backend();
void set_backend(Backend b);
bool openmp_compiled();

// C[m x n] = A[m x k] * B[k x n]
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);
// C[m x n] = A[m x k] * B[n x k]^T
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);
// C[k x n] = A[m x k]^T * B[m x n]
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);
// C[k x n] += A[m x k]^T * B[m x n]; weight-gradient accumulation.
void matmul_tn_acc(const double* a, const double* b, double* c, int m, int k, int n);

// y[r x c] += bias broadcast over rows
void add_bias_rows(double* y, const double* bias, int rows, int cols);
// out[c] += sum over rows of x[r x c]; bias-gradient accumulation.
void col_sums_acc(const double* x, double* out, int rows, int cols);
// a[i] += b[i]
void add_inplace(double* a, const double* b, std::size_t n);

// In-place row-wise softmax.
void softmax_rows(double* x, int rows, int cols);
// dx from cached probabilities y and upstream dy.
void softmax_rows_backward(const double* y, const double* dy, double* dx,
                           int rows, int cols);

// Row-wise layer normalization with learned gain/bias.
// mean/rstd are per-row caches written by the forward pass.
void layernorm_forward(const double* x, const double* gain, const double* bias,
                       double* y, double* mean, double* rstd, int rows, int cols);
// dgain/dbias are accumulated (+=) so callers can sum over a batch.
void layernorm_backward(const double* x, const double* gain, const double* mean,
                        const double* rstd, const double* dy, double* dx,
                        double* dgain, double* dbias, int rows, int cols);

// Exact GELU (erf form) and its derivative.
void gelu_forward(const double* x, double* y, std::size_t n);
void gelu_backward(const double* x, const double* dy, double* dx, std::size_t n);

}  // namespace vareg::kernels
