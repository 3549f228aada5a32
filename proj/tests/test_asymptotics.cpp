#include <doctest.h>

#include <cmath>

#include "lqlr/asymptotics.hpp"
#include "lqlr/estimation.hpp"
#include "lqlr/lqlr_test.hpp"
#include "lqlr/prob.hpp"
#include "oracles.hpp"

using namespace lqlr;

namespace {

GrossErrorModel figure1_model(const NormalKnownVariance& fam, double eps) {
  // h = (1 - eps) phi(x; 0, 1) + eps phi(x; 0, 10), second argument a variance
  return GrossErrorModel(fam, VectorXd::Zero(1), NormalComponent::univariate(0.0, 10.0), eps);
}

}  // namespace

TEST_CASE("sandwich at eps = 0, q = 1 recovers the Fisher information") {
  NormalKnownVariance fam(1.0);
  const GrossErrorModel clean = figure1_model(fam, 0.0);
  const SandwichMatrices s = sandwich(clean, VectorXd::Zero(1), LqParam{1.0}, 1);
  CHECK(s.A(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(s.B(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
  REQUIRE(s.lambdas.size() == 1);
  CHECK(std::fabs(s.lambdas[0] - 1.0) < 1e-6);
  CHECK(s.meta.method == ExpectationMethod::Quadrature);
}

TEST_CASE("Theorem 4: A/B exceeds 1 under contamination and grows with eps") {
  NormalKnownVariance fam(1.0);
  double prev = 1.0;
  for (double eps : {0.05, 0.1, 0.2}) {
    const SandwichMatrices s = sandwich(figure1_model(fam, eps), VectorXd::Zero(1), LqParam{1.0}, 1);
    const double ratio = s.A(0, 0) / s.B(0, 0);
    CHECK(ratio > 1.0);
    CHECK(ratio > prev);
    prev = ratio;
  }
}

TEST_CASE("Theorem 5: some q < 1 pulls the ratio back toward 1") {
  NormalKnownVariance fam(1.0);
  const auto rows = ratio_surface(fam, VectorXd::Zero(1), NormalComponent::univariate(0.0, 10.0),
                                  {0.0, 0.05, 0.1, 0.2}, default_q_grid());
  // eps = 0 column at q = 1 is exactly 1
  for (const auto& r : rows)
    if (r.eps == 0.0 && r.q == 1.0) CHECK(r.ratio == doctest::Approx(1.0).epsilon(1e-8));

  for (double eps : {0.05, 0.1, 0.2}) {
    double at_one = 0.0;
    for (const auto& r : rows)
      if (r.eps == eps && r.q == 1.0) at_one = std::fabs(r.ratio - 1.0);
    bool improved = false;
    for (const auto& r : rows)
      if (r.eps == eps && r.q < 1.0 && std::fabs(r.ratio - 1.0) < at_one) improved = true;
    CHECK(improved);
  }

  // Theorem 4 monotonicity along each fixed-q row restricted to q = 1
  double prev = 0.0;
  for (const auto& r : rows)
    if (r.q == 1.0) {
      CHECK(r.ratio >= prev);
      prev = r.ratio;
    }
}

TEST_CASE("sandwich validates inputs") {
  NormalKnownVariance fam(1.0);
  const GrossErrorModel clean = figure1_model(fam, 0.0);
  CHECK_THROWS_AS(sandwich(clean, VectorXd::Zero(1), LqParam{1.0}, 2), std::invalid_argument);
  ExpectationOptions mc;
  mc.method = ExpectationMethod::Quadrature;
  MultivariateNormalKnownCovariance mvn(MatrixXd::Identity(2, 2));
  const GrossErrorModel model2(
      mvn, VectorXd::Zero(2), NormalComponent(VectorXd::Zero(2), 30.0 * MatrixXd::Identity(2, 2)),
      0.1);
  CHECK_THROWS_AS(sandwich(model2, VectorXd::Zero(2), LqParam{1.0}, 2, mc),
                  std::invalid_argument);
}

TEST_CASE("Theorems 6 and 7 on the two-dimensional Figure-2 setup") {
  MultivariateNormalKnownCovariance fam(MatrixXd::Identity(2, 2));
  ExpectationOptions opts;
  opts.method = ExpectationMethod::MonteCarlo;
  opts.mc_draws = 400'000;
  opts.mc_seed = 20250811;

  const NormalComponent g(VectorXd::Zero(2), 30.0 * MatrixXd::Identity(2, 2));

  // clean edge: both eigenvalues 1 (within Monte Carlo error)
  const GrossErrorModel clean(fam, VectorXd::Zero(2), g, 0.0);
  const SandwichMatrices s0 = sandwich(clean, VectorXd::Zero(2), LqParam{1.0}, 2, opts);
  REQUIRE(s0.lambdas.size() == 2);
  CHECK(std::fabs(s0.lambdas[0] - 1.0) < 0.01);
  CHECK(std::fabs(s0.lambdas[1] - 1.0) < 0.01);

  const GrossErrorModel dirty(fam, VectorXd::Zero(2), g, 0.1);
  const SandwichMatrices s1 = sandwich(dirty, VectorXd::Zero(2), LqParam{1.0}, 2, opts);
  const SandwichMatrices s97 = sandwich(dirty, VectorXd::Zero(2), LqParam{0.97}, 2, opts);
  for (int j = 0; j < 2; ++j) {
    CHECK(s1.lambdas[j] > 1.0);
    CHECK(std::fabs(s97.lambdas[j] - 1.0) < std::fabs(s1.lambdas[j] - 1.0));
  }

  // spectral bound: max_j lambda_j(AB^-1) <= lambda_max(A) / lambda_min(B)
  for (const SandwichMatrices* s : {&s0, &s1, &s97}) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> ea(s->A), eb(s->B);
    CHECK(s->lambdas[0] <=
          ea.eigenvalues().maxCoeff() / eb.eigenvalues().minCoeff() + 1e-9);
  }
}

TEST_CASE("weighted chi-squared quantiles against chi-square oracles") {
  VectorXd one(1), two(1), three(3);
  one << 1.0;
  two << 2.0;
  three << 1.0, 1.0, 1.0;

  const WeightedChiSquared w1(one, 1'000'000, 1);
  CHECK(std::fabs(w1.quantile(0.95) - oracles::kChiSq1_95) < 0.05);
  const WeightedChiSquared w2(two, 1'000'000, 2);
  CHECK(std::fabs(w2.quantile(0.95) - 2.0 * oracles::kChiSq1_95) < 0.1);
  const WeightedChiSquared w3(three, 1'000'000, 3);
  CHECK(std::fabs(w3.quantile(0.95) - oracles::kChiSq3_95) < 0.1);

  // cdf and quantile answer from the same draws: exact round trip within
  // twice the Monte Carlo standard error
  for (double p : {0.5, 0.9, 0.95, 0.99}) {
    const double q = w3.quantile(p);
    CHECK(std::fabs(w3.cdf(q) - p) <= 2.0 * w3.cdf_stderr(q) + 2e-6);
  }
  CHECK(w1.quantile_stderr(0.95) < 0.02);
  CHECK_THROWS_AS(WeightedChiSquared(VectorXd(), 1'000'000, 0), std::invalid_argument);
  CHECK_THROWS_AS(weighted_chisq_quantile(one, 1.5), std::invalid_argument);
}

TEST_CASE("asymptotic summary: power at delta = 0 is alpha; clean argmin at q = 1") {
  NormalKnownVariance fam(1.0);
  const GrossErrorModel clean = figure1_model(fam, 0.0);
  const AsymptoticSummary at_zero =
      asymptotic_summary(clean, VectorXd::Zero(1), LqParam{0.8}, 0.0, 0.05);
  CHECK(at_zero.limiting_power == doctest::Approx(0.05).epsilon(1e-10));

  double best_q = -1.0, best_v = 1e300;
  for (double qv : default_q_grid()) {
    const AsymptoticSummary s =
        asymptotic_summary(clean, VectorXd::Zero(1), LqParam{qv}, 1.0, 0.05);
    CHECK(s.relative_efficiency <= 1.0 + 1e-10);
    if (s.v_q <= best_v) {
      best_v = s.v_q;
      best_q = qv;
    }
  }
  CHECK(best_q == 1.0);
}

TEST_CASE("asymptotic summary refuses asymmetric contamination unless overridden") {
  NormalKnownVariance fam(1.0);
  const GrossErrorModel off(fam, VectorXd::Zero(1), NormalComponent::univariate(-5.0, 1e-4), 0.1);
  CHECK_THROWS_AS(asymptotic_summary(off, VectorXd::Zero(1), LqParam{0.8}, 1.0, 0.05),
                  std::invalid_argument);
  const AsymptoticSummary forced =
      asymptotic_summary(off, VectorXd::Zero(1), LqParam{0.8}, 1.0, 0.05, true);
  CHECK(forced.v_q > 0.0);
}

TEST_CASE("Figure 5 behavior: optimal q falls as contamination grows") {
  NormalKnownVariance fam(1.0);
  std::vector<double> argmins;
  for (double eps : {0.0, 0.05, 0.1, 0.2}) {
    const GrossErrorModel model(fam, VectorXd::Zero(1),
                                NormalComponent::univariate(0.0, 50.0), eps);
    double best_q = -1.0, best_v = 1e300;
    for (int step = 0; step <= 50; ++step) {
      const double qv = std::min(1.0, 0.5 + 0.01 * step);
      const SandwichMatrices s = sandwich(model, VectorXd::Zero(1), LqParam{qv}, 1);
      const double v = s.A(0, 0) / (s.B(0, 0) * s.B(0, 0));
      if (v <= best_v) {
        best_v = v;
        best_q = qv;
      }
    }
    argmins.push_back(best_q);
  }
  CHECK(argmins[0] == doctest::Approx(1.0));
  for (std::size_t i = 1; i < argmins.size(); ++i) {
    CHECK(argmins[i] <= argmins[i - 1] + 1e-9);
    CHECK(argmins[i] >= 0.6);
    CHECK(argmins[i] <= 0.9);
  }
}

TEST_CASE("influence function: classical line at q = 1, redescending for q < 1") {
  NormalKnownVariance fam(1.0);
  const VectorXd theta = VectorXd::Constant(1, 0.4);
  std::vector<double> grid;
  for (double x = -30.0; x <= 30.0; x += 0.25) grid.push_back(x);

  const auto classical = influence_function(fam, theta, LqParam{1.0}, grid);
  for (const auto& pt : classical)
    CHECK(pt.value == doctest::Approx(pt.x - 0.4).epsilon(1e-6));

  const auto robust = influence_function(fam, theta, LqParam{0.7}, grid);
  double sup = 0.0;
  for (const auto& pt : robust) sup = std::max(sup, std::fabs(pt.value));
  CHECK(std::isfinite(sup));
  CHECK(std::fabs(robust.front().value) < 1e-8);  // |IF| -> 0 in the far tails
  CHECK(std::fabs(robust.back().value) < 1e-8);
  CHECK(sup > 0.1);

  const auto lif = level_influence(fam, theta, LqParam{0.7}, 0.05, {0.4, 5.0, -7.0});
  CHECK(lif[0].value == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(std::isfinite(lif[1].value));
}

TEST_CASE("simulated null of D_1 matches the weighted chi-square law (clean case)") {
  NormalKnownVariance fam(1.0);
  const GrossErrorModel clean = figure1_model(fam, 0.0);
  const SandwichMatrices s = sandwich(clean, VectorXd::Zero(1), LqParam{1.0}, 1);
  const WeightedChiSquared law(s.lambdas, 1'000'000, 5);

  HypothesisSpec spec;
  spec.family = &fam;
  spec.theta0 = VectorXd::Zero(1);

  const int M = 800;
  std::vector<double> draws(M);
  for (int rep = 0; rep < M; ++rep) {
    const MatrixXd d = clean.sample(500, derive_seed(31337, {static_cast<std::uint64_t>(rep)}));
    draws[rep] = lqlr_statistic(d, spec, LqParam{1.0});
  }
  const double ks = oracles::ks_distance(draws, [&](double x) { return law.cdf(x); });
  CHECK(ks <= 0.06);
}
