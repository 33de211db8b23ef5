#include "vareg/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>

#include "vareg/common.hpp"

namespace vareg::losses {

namespace {

constexpr double kCccEps = 1e-8;

void check_pair(std::span<const double> pred, std::span<const double> gold) {
  if (pred.size() != gold.size())
    fail(Errc::length_mismatch, "pred and gold lengths differ");
  if (pred.empty()) fail(Errc::empty_batch, "empty batch");
}

bool is_constant(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] != v[0]) return false;
  return true;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct BatchMoments {
  double mean_p, mean_g, var_p, var_g, cov;
};

BatchMoments moments(std::span<const double> p, std::span<const double> g) {
  const double n = static_cast<double>(p.size());
  double mp = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp += p[i];
    mg += g[i];
  }
  mp /= n;
  mg /= n;
  double vp = 0.0, vg = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dp = p[i] - mp;
    const double dg = g[i] - mg;
    vp += dp * dp;
    vg += dg * dg;
    cov += dp * dg;
  }
  return {mp, mg, vp / n, vg / n, cov / n};
}

}  // namespace

Kind kind_from_string(const std::string& s) {
  if (s == "mse") return Kind::mse;
  if (s == "cccl") return Kind::cccl;
  if (s == "rl") return Kind::rl;
  if (s == "mse+cccl") return Kind::mse_cccl;
  if (s == "rl+cccl") return Kind::rl_cccl;
  fail(Errc::config_error, "unknown loss kind '" + s + "'");
}

std::string kind_to_string(Kind k) {
  switch (k) {
    case Kind::mse: return "mse";
    case Kind::cccl: return "cccl";
    case Kind::rl: return "rl";
    case Kind::mse_cccl: return "mse+cccl";
    case Kind::rl_cccl: return "rl+cccl";
  }
  return "?";
}

bool uses_cccl(Kind k) {
  return k == Kind::cccl || k == Kind::mse_cccl || k == Kind::rl_cccl;
}

bool uses_robust(Kind k) { return k == Kind::rl || k == Kind::rl_cccl; }

double mse_loss(std::span<const double> pred, std::span<const double> gold) {
  check_pair(pred, gold);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = gold[i] - pred[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

void mse_grad(std::span<const double> pred, std::span<const double> gold,
              std::span<double> dpred) {
  check_pair(pred, gold);
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    dpred[i] = 2.0 * (pred[i] - gold[i]) * inv_n;
}

double ccc_loss(std::span<const double> pred, std::span<const double> gold) {
  check_pair(pred, gold);
  if (pred.size() < 2)
    fail(Errc::degenerate_batch, "ccc loss needs at least two instances");
  if (is_constant(pred) && is_constant(gold))
    fail(Errc::degenerate_batch, "both vectors constant");
  const auto m = moments(pred, gold);
  const double shift = m.mean_g - m.mean_p;
  const double denom = m.var_p + m.var_g + shift * shift + kCccEps;
  const double ccc = 2.0 * m.cov / denom;
  return 1.0 - ccc;
}

void ccc_grad(std::span<const double> pred, std::span<const double> gold,
              std::span<double> dpred) {
  check_pair(pred, gold);
  if (pred.size() < 2 || (is_constant(pred) && is_constant(gold)))
    fail(Errc::degenerate_batch, "ccc gradient undefined on degenerate batch");
  const auto m = moments(pred, gold);
  const double n = static_cast<double>(pred.size());
  const double shift = m.mean_p - m.mean_g;
  const double denom = m.var_p + m.var_g + shift * shift + kCccEps;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dcov = (gold[i] - m.mean_g) / n;
    const double ddenom = 2.0 * (pred[i] - m.mean_p) / n + 2.0 * shift / n;
    const double dccc = (2.0 * dcov * denom - 2.0 * m.cov * ddenom) / (denom * denom);
    dpred[i] = -dccc;
  }
}

// ------------------------------------------------------------------
// Robust loss family.

double robust_rho(double x, double alpha, double c) {
  if (c <= 0.0) fail(Errc::non_positive_scale, "robust loss scale must be > 0");
  const double u = (x / c) * (x / c);
  if (alpha == 2.0) return 0.5 * u;
  if (alpha == 0.0) return std::log1p(0.5 * u);
  if (std::isinf(alpha) && alpha > 0.0) return -std::expm1(-0.5 * u);
  const double b = std::abs(alpha - 2.0);
  return (b / alpha) * std::expm1(0.5 * alpha * std::log1p(u / b));
}

double robust_drho_dx(double x, double alpha, double c) {
  if (c <= 0.0) fail(Errc::non_positive_scale, "robust loss scale must be > 0");
  const double inv_c2 = 1.0 / (c * c);
  const double u = (x / c) * (x / c);
  if (alpha == 2.0) return x * inv_c2;
  if (alpha == 0.0) return 2.0 * x / (x * x + 2.0 * c * c);
  if (std::isinf(alpha) && alpha > 0.0) return x * inv_c2 * std::exp(-0.5 * u);
  const double b = std::abs(alpha - 2.0);
  return x * inv_c2 * std::exp((0.5 * alpha - 1.0) * std::log1p(u / b));
}

double robust_drho_dalpha(double x, double alpha, double c) {
  if (c <= 0.0) fail(Errc::non_positive_scale, "robust loss scale must be > 0");
  // Only meaningful away from the exact special-case branch points; the
  // adaptive path maps a latent through a sigmoid so alpha stays interior.
  const double u = (x / c) * (x / c);
  const double b = std::abs(alpha - 2.0);
  const double db_da = (alpha < 2.0) ? -1.0 : 1.0;
  const double log_s = std::log1p(u / b);
  const double pow_term = std::exp(0.5 * alpha * log_s);      // s^(a/2)
  const double em1 = std::expm1(0.5 * alpha * log_s);         // s^(a/2) - 1
  const double s = 1.0 + u / b;
  const double dcoef = (db_da * alpha - b) / (alpha * alpha);
  const double ds_da = -(u / (b * b)) * db_da;
  const double dpow = pow_term * (0.5 * log_s + 0.5 * alpha * ds_da / s);
  return dcoef * em1 + (b / alpha) * dpow;
}

double robust_loss(std::span<const double> residuals, double alpha, double c) {
  if (residuals.empty()) fail(Errc::empty_batch, "empty residual vector");
  double acc = 0.0;
  for (double x : residuals) acc += robust_rho(x, alpha, c);
  return acc / static_cast<double>(residuals.size());
}

double alpha_from_latent(double latent, const LossConfig& cfg) {
  return cfg.alpha_lo + (cfg.alpha_hi - cfg.alpha_lo) * stable_sigmoid(latent);
}

double dalpha_dlatent(double latent, const LossConfig& cfg) {
  const double s = stable_sigmoid(latent);
  return (cfg.alpha_hi - cfg.alpha_lo) * s * (1.0 - s);
}

// ------------------------------------------------------------------
// Log partition of the robust density, c = 1:
//   Z(alpha) = integral exp(-rho(x, alpha, 1)) dx over the real line.
// No closed form for general alpha, so the value is computed by
// quadrature on a dense grid over [0, 2] and interpolated.

double robust_partition_quadrature(double alpha) {
  // Split at x = 1; the tail is integrated in log space (x = exp(y)),
  // which resolves the slowly decaying tails near alpha = 0.
  const auto f = [alpha](double x) { return std::exp(-robust_rho(x, alpha, 1.0)); };

  auto simpson = [](auto&& g, double a, double b, int n) {
    const double h = (b - a) / n;
    double acc = g(a) + g(b);
    for (int i = 1; i < n; ++i) acc += g(a + h * i) * ((i % 2) ? 4.0 : 2.0);
    return acc * h / 3.0;
  };

  const double head = simpson(f, 0.0, 1.0, 512);
  const auto tail_integrand = [&f](double y) { return f(std::exp(y)) * std::exp(y); };
  const double tail = simpson(tail_integrand, 0.0, 60.0, 16384);
  return 2.0 * (head + tail);
}

namespace {

// Uniform grid over [0, 2], spacing 0.01, holding log Z(alpha).
class PartitionTable {
 public:
  static const PartitionTable& instance() {
    static PartitionTable table;
    return table;
  }

  double value(double alpha) const { return eval(alpha).first; }
  double derivative(double alpha) const { return eval(alpha).second; }

 private:
  static constexpr int kPoints = 201;
  static constexpr double kSpacing = 0.01;
  std::array<double, kPoints> log_z_{};

  PartitionTable() {
    for (int i = 0; i < kPoints; ++i)
      log_z_[i] = std::log(robust_partition_quadrature(i * kSpacing));
  }

  // Catmull-Rom cubic through the grid; C1, analytic derivative.
  // Endpoints use linearly extrapolated ghost knots so the one-sided
  // tangents keep full accuracy.
  std::pair<double, double> eval(double alpha) const {
    const double a = std::clamp(alpha, 0.0, 2.0);
    int k = static_cast<int>(a / kSpacing);
    k = std::min(k, kPoints - 2);
    const double t = (a - k * kSpacing) / kSpacing;
    const double p1 = log_z_[k];
    const double p2 = log_z_[k + 1];
    const double p0 = (k > 0) ? log_z_[k - 1] : 2.0 * p1 - p2;
    const double p3 =
        (k + 2 < kPoints) ? log_z_[k + 2] : 2.0 * p2 - p1;
    const double m1 = 0.5 * (p2 - p0);
    const double m2 = 0.5 * (p3 - p1);
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double value = (2 * t3 - 3 * t2 + 1) * p1 + (t3 - 2 * t2 + t) * m1 +
                         (-2 * t3 + 3 * t2) * p2 + (t3 - t2) * m2;
    const double dvalue = (6 * t2 - 6 * t) * p1 + (3 * t2 - 4 * t + 1) * m1 +
                          (-6 * t2 + 6 * t) * p2 + (3 * t2 - 2 * t) * m2;
    return {value, dvalue / kSpacing};
  }
};

}  // namespace

double robust_log_partition(double alpha) {
  return PartitionTable::instance().value(alpha);
}

double robust_log_partition_dalpha(double alpha) {
  return PartitionTable::instance().derivative(alpha);
}

double robust_loss_adaptive_nll(std::span<const double> residuals,
                                double latent_alpha, const LossConfig& cfg) {
  if (cfg.robust_c <= 0.0)
    fail(Errc::non_positive_scale, "robust loss scale must be > 0");
  const double alpha = alpha_from_latent(latent_alpha, cfg);
  return robust_loss(residuals, alpha, cfg.robust_c) + std::log(cfg.robust_c) +
         robust_log_partition(alpha);
}

void robust_nll_grad(std::span<const double> residuals, double latent_alpha,
                     const LossConfig& cfg, std::span<double> dresidual,
                     double* dlatent) {
  if (residuals.empty()) fail(Errc::empty_batch, "empty residual vector");
  const double alpha = alpha_from_latent(latent_alpha, cfg);
  const double inv_n = 1.0 / static_cast<double>(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i)
    dresidual[i] = robust_drho_dx(residuals[i], alpha, cfg.robust_c) * inv_n;
  if (dlatent != nullptr) {
    const double da_dl = dalpha_dlatent(latent_alpha, cfg);
    if (da_dl == 0.0) {
      *dlatent = 0.0;  // sigmoid saturated; avoid evaluating at the branch point
    } else {
      double drho_da = 0.0;
      for (double x : residuals)
        drho_da += robust_drho_dalpha(x, alpha, cfg.robust_c);
      drho_da *= inv_n;
      *dlatent = (drho_da + robust_log_partition_dalpha(alpha)) * da_dl;
    }
  }
}

double hybrid_loss(Kind kind, std::span<const double> pred,
                   std::span<const double> gold, const LossConfig& cfg) {
  if (kind != Kind::mse_cccl && kind != Kind::rl_cccl)
    fail(Errc::config_error, "hybrid_loss requires mse+cccl or rl+cccl");
  double instance_term;
  if (kind == Kind::mse_cccl) {
    instance_term = mse_loss(pred, gold);
  } else {
    std::vector<double> residuals(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) residuals[i] = gold[i] - pred[i];
    instance_term = robust_loss(residuals, cfg.robust_alpha, cfg.robust_c);
  }
  return instance_term + ccc_loss(pred, gold);
}

// ------------------------------------------------------------------
// Trainer-facing dispatch.

DimLossResult eval_dim_loss(const LossConfig& cfg, std::span<const double> pred,
                            std::span<const double> gold, double latent_alpha) {
  check_pair(pred, gold);
  DimLossResult out;
  out.dpred.assign(pred.size(), 0.0);

  const bool degenerate =
      uses_cccl(cfg.kind) &&
      (pred.size() < 2 || (is_constant(pred) && is_constant(gold)));
  if (degenerate) {
    if (cfg.small_batch_fallback == SmallBatchFallback::raise_error)
      fail(Errc::degenerate_batch, "ccc-based loss on degenerate batch");
    // Fallback: the whole batch trains on plain MSE; the event is
    // surfaced to the caller for logging.
    out.value = mse_loss(pred, gold);
    mse_grad(pred, gold, out.dpred);
    out.fallback_used = true;
    return out;
  }

  auto add_mse = [&] {
    out.value += mse_loss(pred, gold);
    std::vector<double> g(pred.size());
    mse_grad(pred, gold, g);
    for (std::size_t i = 0; i < g.size(); ++i) out.dpred[i] += g[i];
  };
  auto add_ccc = [&] {
    out.value += ccc_loss(pred, gold);
    std::vector<double> g(pred.size());
    ccc_grad(pred, gold, g);
    for (std::size_t i = 0; i < g.size(); ++i) out.dpred[i] += g[i];
  };
  auto add_robust = [&] {
    std::vector<double> residuals(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) residuals[i] = gold[i] - pred[i];
    std::vector<double> dres(pred.size());
    if (cfg.adaptive) {
      double dlat = 0.0;
      out.value += robust_loss_adaptive_nll(residuals, latent_alpha, cfg);
      robust_nll_grad(residuals, latent_alpha, cfg, dres, &dlat);
      out.dlatent += dlat;
    } else {
      out.value += robust_loss(residuals, cfg.robust_alpha, cfg.robust_c);
      const double inv_n = 1.0 / static_cast<double>(residuals.size());
      for (std::size_t i = 0; i < residuals.size(); ++i)
        dres[i] = robust_drho_dx(residuals[i], cfg.robust_alpha, cfg.robust_c) * inv_n;
    }
    // x = gold - pred, so d/dpred = -d/dx.
    for (std::size_t i = 0; i < dres.size(); ++i) out.dpred[i] -= dres[i];
  };

  switch (cfg.kind) {
    case Kind::mse: add_mse(); break;
    case Kind::cccl: add_ccc(); break;
    case Kind::rl: add_robust(); break;
    case Kind::mse_cccl:
      add_mse();
      add_ccc();
      break;
    case Kind::rl_cccl:
      add_robust();
      add_ccc();
      break;
  }
  return out;
}

LossValue total_loss(std::span<const double> pred_v, std::span<const double> pred_a,
                     std::span<const double> gold_v, std::span<const double> gold_a,
                     const LossConfig& cfg, double latent_alpha) {
  const auto rv = eval_dim_loss(cfg, pred_v, gold_v, latent_alpha);
  const auto ra = eval_dim_loss(cfg, pred_a, gold_a, latent_alpha);
  return {rv.value + ra.value, rv.value, ra.value};
}

TotalLossResult total_loss_with_grad(std::span<const double> pred_v,
                                     std::span<const double> pred_a,
                                     std::span<const double> gold_v,
                                     std::span<const double> gold_a,
                                     const LossConfig& cfg, double latent_alpha) {
  TotalLossResult out;
  auto rv = eval_dim_loss(cfg, pred_v, gold_v, latent_alpha);
  auto ra = eval_dim_loss(cfg, pred_a, gold_a, latent_alpha);
  out.value = {rv.value + ra.value, rv.value, ra.value};
  out.dpred_v = std::move(rv.dpred);
  out.dpred_a = std::move(ra.dpred);
  out.dlatent = rv.dlatent + ra.dlatent;
  out.fallback_events = (rv.fallback_used ? 1 : 0) + (ra.fallback_used ? 1 : 0);
  return out;
}

}  // namespace vareg::losses
