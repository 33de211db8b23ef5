#pragma once

#include <span>
#include <string>
#include <vector>

namespace vareg::losses {

enum class Kind { mse, cccl, rl, mse_cccl, rl_cccl };

Kind kind_from_string(const std::string& s);    // "mse+cccl" etc.
std::string kind_to_string(Kind k);
bool uses_cccl(Kind k);
bool uses_robust(Kind k);

enum class SmallBatchFallback { substitute_mse, raise_error };

struct LossConfig {
  Kind kind = Kind::mse;
  // Robust-loss state. alpha is the effective shape parameter; when
  // adaptive is set the trainer owns a latent scalar and alpha follows
  // alpha_lo + (alpha_hi - alpha_lo) * sigmoid(latent).
  double robust_alpha = 1.0;
  double robust_c = 0.1;
  double alpha_lo = 0.0;
  double alpha_hi = 2.0;
  bool adaptive = true;
  SmallBatchFallback small_batch_fallback = SmallBatchFallback::substitute_mse;
};

struct LossValue {
  double total = 0.0;
  double valence_component = 0.0;
  double arousal_component = 0.0;
};

// ------------------------------------------------------------------
// Elementary losses. All reduce over the batch dimension.

double mse_loss(std::span<const double> pred, std::span<const double> gold);
void mse_grad(std::span<const double> pred, std::span<const double> gold,
              std::span<double> dpred);

// Concordance correlation loss, 1 - CCC, computed at batch level.
// Throws DegenerateBatch for N < 2 or when both vectors are constant.
double ccc_loss(std::span<const double> pred, std::span<const double> gold);
void ccc_grad(std::span<const double> pred, std::span<const double> gold,
              std::span<double> dpred);

// General robust loss over residuals x = gold - pred, mean-reduced.
// Dispatches the exact branches at alpha == 2, 0 and +infinity and the
// general expression elsewhere (numerically stable via expm1/log1p).
double robust_loss(std::span<const double> residuals, double alpha, double c);
double robust_rho(double x, double alpha, double c);
double robust_drho_dx(double x, double alpha, double c);
double robust_drho_dalpha(double x, double alpha, double c);

// Latent parameterization of alpha.
double alpha_from_latent(double latent, const LossConfig& cfg);
double dalpha_dlatent(double latent, const LossConfig& cfg);

// Log partition log Z(alpha) of the robust-loss density with c = 1,
// precomputed on a uniform alpha grid over [0, 2] (spacing 0.01) and
// evaluated through a C1 cubic interpolant.
double robust_log_partition(double alpha);
double robust_log_partition_dalpha(double alpha);
// Direct quadrature; the grid is built from this. Exposed for tests.
double robust_partition_quadrature(double alpha);

// Negative log-likelihood form: mean robust loss plus log(c) + log Z(alpha),
// with alpha given through the latent parameterization. Minimizing jointly
// over the latent is well-posed.
double robust_loss_adaptive_nll(std::span<const double> residuals,
                                double latent_alpha, const LossConfig& cfg);
// d nll / d residual_i and d nll / d latent.
void robust_nll_grad(std::span<const double> residuals, double latent_alpha,
                     const LossConfig& cfg, std::span<double> dresidual,
                     double* dlatent);

// Per-dimension hybrid: instance-level term (mse or robust) plus the
// batch-level ccc loss. kind must be mse_cccl or rl_cccl.
double hybrid_loss(Kind kind, std::span<const double> pred,
                   std::span<const double> gold, const LossConfig& cfg);

// ------------------------------------------------------------------
// Trainer-facing evaluation: one affective dimension, value + gradient
// with the configured small-batch fallback applied.

struct DimLossResult {
  double value = 0.0;
  std::vector<double> dpred;
  double dlatent = 0.0;
  bool fallback_used = false;
};

DimLossResult eval_dim_loss(const LossConfig& cfg, std::span<const double> pred,
                            std::span<const double> gold, double latent_alpha);

// Equal-weight sum over the two affective dimensions.
LossValue total_loss(std::span<const double> pred_v, std::span<const double> pred_a,
                     std::span<const double> gold_v, std::span<const double> gold_a,
                     const LossConfig& cfg, double latent_alpha = 0.0);

struct TotalLossResult {
  LossValue value;
  std::vector<double> dpred_v;
  std::vector<double> dpred_a;
  double dlatent = 0.0;
  int fallback_events = 0;
};

TotalLossResult total_loss_with_grad(std::span<const double> pred_v,
                                     std::span<const double> pred_a,
                                     std::span<const double> gold_v,
                                     std::span<const double> gold_a,
                                     const LossConfig& cfg, double latent_alpha);

}  // namespace vareg::losses
