#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "vareg/common.hpp"
#include "vareg/losses.hpp"

using namespace vareg;
using namespace vareg::losses;

namespace {

std::vector<double> random_unit_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

// Straight transcription of the concordance definition: one minus
// 2*rho*sd_y*sd_yhat / (var_y + var_yhat + (mean_y - mean_yhat)^2),
// kept independent of the implementation it checks.
double ccc_loss_oracle(const std::vector<double>& pred,
                       const std::vector<double>& gold) {
  const double n = static_cast<double>(pred.size());
  double mp = 0, mg = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mp += pred[i];
    mg += gold[i];
  }
  mp /= n;
  mg /= n;
  double vp = 0, vg = 0, cov = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    vp += (pred[i] - mp) * (pred[i] - mp);
    vg += (gold[i] - mg) * (gold[i] - mg);
    cov += (pred[i] - mp) * (gold[i] - mg);
  }
  vp /= n;
  vg /= n;
  cov /= n;
  const double sp = std::sqrt(vp), sg = std::sqrt(vg);
  const double rho = cov / (sp * sg);
  const double ccc = 2.0 * rho * sg * sp / (vg + vp + (mg - mp) * (mg - mp) + 1e-8);
  return 1.0 - ccc;
}

// Central-difference gradient of a dimension loss w.r.t. predictions.
std::vector<double> fd_grad(const LossConfig& cfg, std::vector<double> pred,
                            const std::vector<double>& gold, double latent) {
  const double h = 1e-6;
  std::vector<double> grad(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double keep = pred[i];
    pred[i] = keep + h;
    const double fp = eval_dim_loss(cfg, pred, gold, latent).value;
    pred[i] = keep - h;
    const double fm = eval_dim_loss(cfg, pred, gold, latent).value;
    pred[i] = keep;
    grad[i] = (fp - fm) / (2 * h);
  }
  return grad;
}

void check_rel(double analytic, double numeric, double tol) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  CHECK(std::abs(analytic - numeric) / scale < tol);
}

}  // namespace

TEST_CASE("mse examples and properties") {
  const std::vector<double> a{0.2, 0.4, 0.9}, b{0.1, 0.5, 0.7};
  CHECK(mse_loss(a, a) == 0.0);
  CHECK(mse_loss(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0}) ==
        doctest::Approx(1.0));
  // (0.01 + 0.01 + 0.04) / 3
  CHECK(mse_loss(a, b) == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(mse_loss(a, b) == mse_loss(b, a));
  CHECK_THROWS_AS(mse_loss(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                  ToolkitError);
  CHECK_THROWS_AS(mse_loss(std::vector<double>{}, std::vector<double>{}),
                  ToolkitError);
}

TEST_CASE("ccc loss examples") {
  const std::vector<double> x{0.1, 0.5, 0.9};
  CHECK(ccc_loss(x, x) == doctest::Approx(0.0).epsilon(1e-7));

  // pure shift: CCC = 2 var / (2 var + shift^2)
  std::vector<double> shifted = x;
  for (auto& v : shifted) v += 10.0;
  const double var = (0.16 + 0.0 + 0.16) / 3.0;
  const double expected = 1.0 - 2.0 * var / (2.0 * var + 100.0);
  CHECK(ccc_loss(shifted, x) == doctest::Approx(expected).epsilon(1e-9));

  // anti-correlated pair: CCC = -1, loss = 2
  CHECK(ccc_loss(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 0.0}) ==
        doctest::Approx(2.0).epsilon(1e-7));

  CHECK_THROWS_AS(ccc_loss(std::vector<double>{0.5}, std::vector<double>{0.5}),
                  ToolkitError);
  // both constant -> degenerate
  CHECK_THROWS_AS(
      ccc_loss(std::vector<double>{0.5, 0.5}, std::vector<double>{0.3, 0.3}),
      ToolkitError);
  // one constant vector is fine (denominator keeps the shift term)
  CHECK_NOTHROW(
      ccc_loss(std::vector<double>{0.5, 0.5}, std::vector<double>{0.3, 0.4}));
}

TEST_CASE("ccc loss matches the direct oracle over random batches") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 31;
    const auto pred = random_unit_vec(n, rng);
    const auto gold = random_unit_vec(n, rng);
    const double got = ccc_loss(pred, gold);
    const double want = ccc_loss_oracle(pred, gold);
    CHECK(std::abs(got - want) < 1e-10);
    CHECK(got >= 0.0);
    CHECK(got <= 2.0);
  }
}

TEST_CASE("ccc loss is invariant under paired permutation") {
  std::mt19937_64 rng(13);
  auto pred = random_unit_vec(12, rng);
  auto gold = random_unit_vec(12, rng);
  const double base = ccc_loss(pred, gold);
  std::vector<std::size_t> order(pred.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> p2(pred.size()), g2(gold.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    p2[i] = pred[order[i]];
    g2[i] = gold[order[i]];
  }
  CHECK(ccc_loss(p2, g2) == doctest::Approx(base).epsilon(1e-13));
}

TEST_CASE("robust loss branch values") {
  // residual zero maps to zero for every alpha and c
  for (const double alpha :
       {-2.0, 0.0, 0.5, 1.0, 2.0, std::numeric_limits<double>::infinity()})
    for (const double c : {0.1, 1.0, 3.0}) CHECK(robust_rho(0.0, alpha, c) == 0.0);

  // alpha = 2, c = 1, residual 2: (1/2)(2/1)^2 = 2
  CHECK(robust_loss(std::vector<double>{2.0}, 2.0, 1.0) == 2.0);
  // alpha = 0: log((1/2)(2)^2 + 1) = log 3
  CHECK(robust_loss(std::vector<double>{2.0}, 0.0, 1.0) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-14));
  // alpha = +inf: 1 - exp(-2)
  CHECK(robust_rho(2.0, std::numeric_limits<double>::infinity(), 1.0) ==
        doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-14));

  // alpha = 2 branch is exactly half the squared scaled residual
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double x = dist(rng);
    const double c = 0.1 + 2.0 * std::abs(dist(rng));
    CHECK(robust_rho(x, 2.0, c) == 0.5 * (x / c) * (x / c));
  }

  // even in the residual
  for (int i = 0; i < 50; ++i) {
    const double x = dist(rng);
    for (const double alpha : {0.0, 0.7, 1.3, 2.0})
      CHECK(robust_rho(x, alpha, 1.0) == robust_rho(-x, alpha, 1.0));
  }

  CHECK_THROWS_AS(robust_rho(1.0, 1.0, 0.0), ToolkitError);
  CHECK_THROWS_AS(robust_rho(1.0, 1.0, -2.0), ToolkitError);
}

TEST_CASE("robust loss general branch is continuous at the special points") {
  for (double xc = -10.0; xc <= 10.0; xc += 0.25) {
    const double at_zero = robust_rho(xc, 0.0, 1.0);
    CHECK(std::abs(robust_rho(xc, 1e-6, 1.0) - at_zero) <= 1e-5);
    CHECK(std::abs(robust_rho(xc, -1e-6, 1.0) - at_zero) <= 1e-5);
  }
  for (double xc = -10.0; xc <= 10.0; xc += 0.5) {
    const double at_two = robust_rho(xc, 2.0, 1.0);
    CHECK(std::abs(robust_rho(xc, 2.0 - 1e-9, 1.0) - at_two) <= 1e-5);
  }
}

TEST_CASE("robust drho/dx matches finite differences") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  const double h = 1e-6;
  for (const double alpha : {0.0, 0.3, 1.0, 1.7, 2.0}) {
    for (int i = 0; i < 40; ++i) {
      const double x = dist(rng);
      const double c = 0.1;
      const double fd =
          (robust_rho(x + h, alpha, c) - robust_rho(x - h, alpha, c)) / (2 * h);
      check_rel(robust_drho_dx(x, alpha, c), fd, 1e-5);
    }
  }
}

TEST_CASE("robust drho/dalpha matches finite differences") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::uniform_real_distribution<double> alphas(0.05, 1.95);
  const double h = 1e-6;
  for (int i = 0; i < 60; ++i) {
    const double x = dist(rng);
    const double a = alphas(rng);
    const double fd =
        (robust_rho(x, a + h, 1.0) - robust_rho(x, a - h, 1.0)) / (2 * h);
    check_rel(robust_drho_dalpha(x, a, 1.0), fd, 1e-4);
  }
}

TEST_CASE("partition quadrature reproduces reference values") {
  // endpoints have closed forms: Z(0) = pi*sqrt(2), Z(2) = sqrt(2*pi);
  // interior values frozen from independent high-precision quadrature
  CHECK(robust_partition_quadrature(0.0) ==
        doctest::Approx(4.4428829381583662).epsilon(1e-9));
  CHECK(robust_partition_quadrature(2.0) ==
        doctest::Approx(2.5066282746310005).epsilon(1e-9));
  CHECK(robust_partition_quadrature(0.5) ==
        doctest::Approx(3.6389931308930457).epsilon(1e-9));
  CHECK(robust_partition_quadrature(1.0) ==
        doctest::Approx(3.2723069725265165).epsilon(1e-9));
  CHECK(robust_partition_quadrature(1.5) ==
        doctest::Approx(2.9659248887127895).epsilon(1e-9));
}

TEST_CASE("interpolated log partition tracks direct quadrature") {
  for (const double a : {0.123, 0.5, 0.777, 1.0, 1.234, 1.5, 1.9}) {
    const double direct = std::log(robust_partition_quadrature(a));
    CHECK(robust_log_partition(a) == doctest::Approx(direct).epsilon(1e-6));
  }
}

TEST_CASE("adaptive nll differs from plain robust loss by a data-free constant") {
  LossConfig cfg;
  cfg.kind = Kind::rl;
  cfg.robust_c = 0.1;
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  const double latent = 0.4;
  const double alpha = alpha_from_latent(latent, cfg);
  const double expected_offset = std::log(cfg.robust_c) + robust_log_partition(alpha);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> res(8);
    for (auto& x : res) x = dist(rng);
    const double nll = robust_loss_adaptive_nll(res, latent, cfg);
    const double plain = robust_loss(res, alpha, cfg.robust_c);
    CHECK(nll - plain == doctest::Approx(expected_offset).epsilon(1e-12));
  }
}

TEST_CASE("adaptive nll gradient w.r.t. latent matches finite differences") {
  LossConfig cfg;
  cfg.kind = Kind::rl;
  cfg.robust_c = 0.1;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> dist(-0.3, 0.3);
  std::uniform_real_distribution<double> latents(-2.5, 2.5);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> res(16);
    for (auto& x : res) x = dist(rng);
    const double latent = latents(rng);
    std::vector<double> dres(res.size());
    double dlatent = 0.0;
    robust_nll_grad(res, latent, cfg, dres, &dlatent);
    const double fd = (robust_loss_adaptive_nll(res, latent + h, cfg) -
                       robust_loss_adaptive_nll(res, latent - h, cfg)) /
                      (2 * h);
    check_rel(dlatent, fd, 1e-4);

    for (std::size_t i = 0; i < res.size(); i += 5) {
      auto rp = res, rm = res;
      rp[i] += h;
      rm[i] -= h;
      const double fdr = (robust_loss_adaptive_nll(rp, latent, cfg) -
                          robust_loss_adaptive_nll(rm, latent, cfg)) /
                         (2 * h);
      check_rel(dres[i], fdr, 1e-4);
    }
  }
}

TEST_CASE("minimizing the nll over alpha on gaussian residuals hits the bound") {
  // With standard-normal residuals and c = 1 the family contains the
  // true density exactly at alpha = 2, so the minimizer must push alpha
  // to the upper bound.
  LossConfig cfg;
  cfg.kind = Kind::rl;
  cfg.robust_c = 1.0;
  std::mt19937_64 rng(37);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> res(4000);
  for (auto& x : res) x = gauss(rng);

  double best_alpha = 0.0, best_nll = 1e100;
  for (double alpha = 0.05; alpha <= 1.999; alpha += 0.005) {
    const double nll = robust_loss(res, alpha, 1.0) + robust_log_partition(alpha);
    if (nll < best_nll) {
      best_nll = nll;
      best_alpha = alpha;
    }
  }
  CHECK(best_alpha > 1.9);

  // gradient descent on the latent agrees
  double latent = 0.0;
  for (int it = 0; it < 400; ++it) {
    std::vector<double> dres(res.size());
    double dlatent = 0.0;
    robust_nll_grad(res, latent, cfg, dres, &dlatent);
    latent -= 0.5 * dlatent;
  }
  CHECK(alpha_from_latent(latent, cfg) > 1.9);
}

TEST_CASE("hybrid losses decompose exactly") {
  std::mt19937_64 rng(41);
  const auto pred = random_unit_vec(10, rng);
  const auto gold = random_unit_vec(10, rng);

  LossConfig cfg;
  CHECK(hybrid_loss(Kind::mse_cccl, pred, gold, cfg) ==
        mse_loss(pred, gold) + ccc_loss(pred, gold));
  CHECK(hybrid_loss(Kind::mse_cccl, gold, gold, cfg) ==
        doctest::Approx(0.0).epsilon(1e-7));

  // rl+cccl at alpha=2, c=1: the instance term is exactly MSE/2
  cfg.robust_alpha = 2.0;
  cfg.robust_c = 1.0;
  CHECK(hybrid_loss(Kind::rl_cccl, pred, gold, cfg) ==
        doctest::Approx(0.5 * mse_loss(pred, gold) + ccc_loss(pred, gold))
            .epsilon(1e-13));

  CHECK_THROWS_AS(hybrid_loss(Kind::mse, pred, gold, cfg), ToolkitError);
}

TEST_CASE("total loss sums the two dimensions with equal weight") {
  LossConfig cfg;  // mse
  const std::vector<double> gv{0.2, 0.6, 0.8}, ga{0.1, 0.4, 0.9};
  auto v = total_loss(gv, ga, gv, ga, cfg);
  CHECK(v.total == 0.0);

  // valence perfect, arousal off by 0.2 everywhere -> total = 0.04
  std::vector<double> pa = ga;
  for (auto& x : pa) x += 0.2;
  v = total_loss(gv, pa, gv, ga, cfg);
  CHECK(v.valence_component == 0.0);
  CHECK(v.arousal_component == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(v.total == doctest::Approx(0.04).epsilon(1e-12));

  // swapping the dimension pairs swaps components, total unchanged
  const auto swapped = total_loss(pa, gv, ga, gv, cfg);
  CHECK(swapped.valence_component == doctest::Approx(v.arousal_component));
  CHECK(swapped.arousal_component == doctest::Approx(v.valence_component));
  CHECK(swapped.total == doctest::Approx(v.total));
  CHECK(v.total ==
        doctest::Approx(v.valence_component + v.arousal_component).epsilon(1e-14));
}

TEST_CASE("gradients of all five losses match central finite differences") {
  std::mt19937_64 rng(43);
  for (const auto kind :
       {Kind::mse, Kind::cccl, Kind::rl, Kind::mse_cccl, Kind::rl_cccl}) {
    LossConfig cfg;
    cfg.kind = kind;
    cfg.robust_c = 0.1;
    for (int trial = 0; trial < 5; ++trial) {
      const auto pred = random_unit_vec(16, rng);
      const auto gold = random_unit_vec(16, rng);
      const double latent = 0.2;
      const auto result = eval_dim_loss(cfg, pred, gold, latent);
      const auto fd = fd_grad(cfg, pred, gold, latent);
      for (std::size_t i = 0; i < fd.size(); ++i)
        check_rel(result.dpred[i], fd[i], 1e-4);
    }
  }
}

TEST_CASE("small batch fallback substitutes mse and reports the event") {
  LossConfig cfg;
  cfg.kind = Kind::cccl;
  const std::vector<double> pred{0.7}, gold{0.2};
  const auto r = eval_dim_loss(cfg, pred, gold, 0.0);
  CHECK(r.fallback_used);
  CHECK(r.value == doctest::Approx(mse_loss(pred, gold)));

  LossConfig strict = cfg;
  strict.small_batch_fallback = SmallBatchFallback::raise_error;
  CHECK_THROWS_AS(eval_dim_loss(strict, pred, gold, 0.0), ToolkitError);

  // zero variance in both vectors also falls back
  const std::vector<double> cp{0.5, 0.5}, cg{0.25, 0.25};
  const auto r2 = eval_dim_loss(cfg, cp, cg, 0.0);
  CHECK(r2.fallback_used);
  CHECK(r2.value == doctest::Approx(mse_loss(cp, cg)));
}

TEST_CASE("losses are nonnegative and vanish on perfect predictions") {
  std::mt19937_64 rng(47);
  for (const auto kind :
       {Kind::mse, Kind::cccl, Kind::rl, Kind::mse_cccl, Kind::rl_cccl}) {
    LossConfig cfg;
    cfg.kind = kind;
    cfg.robust_c = 0.1;
    cfg.adaptive = false;  // the nll form carries a data-independent offset
    for (int trial = 0; trial < 20; ++trial) {
      const auto pred = random_unit_vec(12, rng);
      const auto gold = random_unit_vec(12, rng);
      const auto r = eval_dim_loss(cfg, pred, gold, 0.0);
      CHECK(r.value >= 0.0);
      // the ccc epsilon (1e-8 in the denominator) leaves a ~1e-7 floor
      const auto perfect = eval_dim_loss(cfg, gold, gold, 0.0);
      CHECK(std::abs(perfect.value) <= 1e-6);
    }
  }
}

TEST_CASE("alpha parameterization respects the bounds") {
  LossConfig cfg;
  for (const double latent : {-50.0, -3.0, 0.0, 1.0, 40.0}) {
    const double a = alpha_from_latent(latent, cfg);
    CHECK(a >= cfg.alpha_lo);
    CHECK(a <= cfg.alpha_hi);
  }
  CHECK(alpha_from_latent(0.0, cfg) == doctest::Approx(1.0));
}

TEST_CASE("loss kind strings round trip") {
  for (const auto kind :
       {Kind::mse, Kind::cccl, Kind::rl, Kind::mse_cccl, Kind::rl_cccl})
    CHECK(kind_from_string(kind_to_string(kind)) == kind);
  CHECK_THROWS_AS(kind_from_string("huber"), ToolkitError);
}
