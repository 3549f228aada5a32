#include <doctest.h>

#include <cmath>

#include "lqlr/estimation.hpp"
#include "lqlr/mixture.hpp"
#include "lqlr/prob.hpp"
#include "oracles.hpp"

using namespace lqlr;

namespace {

MatrixXd dataset(std::initializer_list<double> values) {
  MatrixXd d(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) d(0, i++) = v;
  return d;
}

VectorXd vec1(double x) {
  VectorXd v(1);
  v[0] = x;
  return v;
}

}  // namespace

TEST_CASE("mlqe at q = 1 equals the closed-form MLE for all three families") {
  Rng rng(99);
  const LqParam one{1.0};

  NormalKnownVariance known(1.4);
  NormalLocationScale locscale;
  MultivariateNormalKnownCovariance mvn(
      (Eigen::MatrixXd(2, 2) << 1.0, 0.5, 0.5, 2.0).finished());

  for (int trial = 0; trial < 10; ++trial) {
    MatrixXd d(1, 40);
    for (int i = 0; i < 40; ++i) d(0, i) = rng.normal(1.0, 2.0);

    const EstimationResult a = mlqe(d, known, one);
    CHECK(a.converged);
    CHECK(a.theta_hat[0] == doctest::Approx(d.row(0).mean()).epsilon(1e-8));
    CHECK(a.weights.minCoeff() == doctest::Approx(1.0));

    const EstimationResult b = mlqe(d, locscale, one);
    const double mean = d.row(0).mean();
    const double sd_mle = std::sqrt((d.row(0).array() - mean).square().mean());
    CHECK(b.theta_hat[0] == doctest::Approx(mean).epsilon(1e-8));
    CHECK(b.theta_hat[1] == doctest::Approx(sd_mle).epsilon(1e-8));

    MatrixXd d2(2, 40);
    for (int i = 0; i < 40; ++i) {
      d2(0, i) = rng.normal(0.0, 1.0);
      d2(1, i) = rng.normal(0.5, 1.5);
    }
    const EstimationResult c = mlqe(d2, mvn, one);
    CHECK(c.theta_hat[0] == doctest::Approx(d2.row(0).mean()).epsilon(1e-8));
    CHECK(c.theta_hat[1] == doctest::Approx(d2.row(1).mean()).epsilon(1e-8));
  }
}

TEST_CASE("mlqe symmetry fixed point") {
  NormalKnownVariance fam(1.0);
  const MatrixXd d = dataset({-1.0, 0.0, 1.0});
  for (double qv : {0.5, 0.7, 0.9, 1.0}) {
    const EstimationResult r = mlqe(d, fam, LqParam{qv});
    CHECK(r.converged);
    CHECK(r.theta_hat[0] == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("mlqe downweights the far point: grid-search oracle") {
  NormalKnownVariance fam(1.0);
  const MatrixXd d = dataset({0.0, 0.1, -0.1, 0.05, 8.0});
  const LqParam q{0.5};
  const EstimationResult r = mlqe(d, fam, q);
  CHECK(r.converged);

  const double oracle = oracles::grid_search_location(fam, d, q, -2.0, 9.0, 1e-4,
                                                      [](double mu) { return vec1(mu); });
  CHECK(std::fabs(r.theta_hat[0] - oracle) < 1e-3);
  // robustness: far closer to 0 than the sample mean 1.61
  CHECK(std::fabs(r.theta_hat[0]) < 0.2);

  // the outlier carries a strictly smaller weight than every interior point
  for (int i = 0; i < 4; ++i) CHECK(r.weights[4] < r.weights[i]);
}

TEST_CASE("mlqe matches the grid oracle on random contaminated samples") {
  NormalKnownVariance fam(1.0);
  const VectorXd theta0 = vec1(0.0);
  for (int trial = 0; trial < 12; ++trial) {
    const GrossErrorModel model(fam, theta0, NormalComponent::univariate(0.0, 50.0), 0.15);
    const MatrixXd d = model.sample(40, 1000 + trial);
    const LqParam q{0.6};
    const EstimationResult r = mlqe(d, fam, q);
    CHECK(r.converged);
    const double oracle = oracles::grid_search_location(fam, d, q, -3.0, 3.0, 1e-4,
                                                        [](double mu) { return vec1(mu); });
    CHECK(std::fabs(r.theta_hat[0] - oracle) < 1e-3);
  }
}

TEST_CASE("constrained mlqe: closed form at q = 1 and grid oracle at q = 0.7") {
  NormalLocationScale fam;
  Rng rng(5);
  MatrixXd d(1, 60);
  for (int i = 0; i < 60; ++i) d(0, i) = rng.normal(0.8, 1.3);

  const EstimationResult r = mlqe_constrained(d, fam, LqParam{1.0}, {{0, 0.0}});
  CHECK(r.converged);
  CHECK(r.theta_hat[0] == 0.0);
  CHECK(r.constraint_mask[0]);
  CHECK_FALSE(r.constraint_mask[1]);
  const double sigma0 = std::sqrt(d.row(0).array().square().mean());
  CHECK(r.theta_hat[1] == doctest::Approx(sigma0).epsilon(1e-8));

  // contaminated sample, sigma fit by 1-d grid search
  const VectorXd truth = (Eigen::VectorXd(2) << 0.0, 1.0).finished();
  const GrossErrorModel model(fam, truth, NormalComponent::univariate(0.0, 50.0), 0.2);
  const MatrixXd dc = model.sample(80, 77);
  const LqParam q{0.7};
  const EstimationResult c = mlqe_constrained(dc, fam, q, {{0, 0.0}});
  CHECK(c.converged);
  double best_sigma = 0.1, best_value = -1e308;
  for (double s = 0.05; s <= 6.0; s += 1e-3) {
    const double value = lq_likelihood(fam, dc, (Eigen::VectorXd(2) << 0.0, s).finished(), q);
    if (value > best_value) {
      best_value = value;
      best_sigma = s;
    }
  }
  CHECK(std::fabs(c.theta_hat[1] - best_sigma) < 1e-3);
}

TEST_CASE("all coordinates fixed returns immediately") {
  NormalLocationScale fam;
  const MatrixXd d = dataset({0.4, -0.2, 1.0});
  const EstimationResult r = mlqe_constrained(d, fam, LqParam{0.8}, {{0, 0.3}, {1, 2.0}});
  CHECK(r.converged);
  CHECK(r.iterations == 0);
  CHECK(r.theta_hat[0] == 0.3);
  CHECK(r.theta_hat[1] == 2.0);
}

TEST_CASE("scale collapse on degenerate data is an explicit failure") {
  NormalLocationScale fam;
  const MatrixXd d = dataset({2.0, 2.0, 2.0, 2.0});
  const EstimationResult r = mlqe(d, fam, LqParam{1.0});
  CHECK_FALSE(r.converged);
  CHECK(r.failure == "scale collapse");
}

TEST_CASE("reweighting ascent: recorded trace is non-decreasing") {
  NormalLocationScale fam;
  const VectorXd truth = (Eigen::VectorXd(2) << 0.0, 1.0).finished();
  for (int trial = 0; trial < 20; ++trial) {
    const GrossErrorModel model(fam, truth, NormalComponent::univariate(-5.0, 1e-4), 0.1);
    const MatrixXd d = model.sample(50, 300 + trial);
    for (double qv : {0.5, 0.8, 1.0}) {
      const EstimationResult r = mlqe(d, fam, LqParam{qv});
      for (std::size_t i = 1; i < r.trace.size(); ++i)
        CHECK(r.trace[i] >= r.trace[i - 1] - 1e-10);
    }
  }
}

TEST_CASE("location equivariance of the mlqe") {
  NormalKnownVariance known(1.0);
  NormalLocationScale locscale;
  Rng rng(31);
  for (int trial = 0; trial < 15; ++trial) {
    MatrixXd d(1, 30);
    for (int i = 0; i < 30; ++i)
      d(0, i) = rng.uniform() < 0.85 ? rng.normal(0.0, 1.0) : rng.normal(0.0, 7.0);
    const double shift = rng.normal(0.0, 10.0);
    MatrixXd shifted = d;
    shifted.row(0).array() += shift;
    for (double qv : {0.6, 0.9}) {
      const LqParam q{qv};
      const EstimationResult base_k = mlqe(d, known, q);
      const EstimationResult move_k = mlqe(shifted, known, q);
      CHECK(move_k.theta_hat[0] == doctest::Approx(base_k.theta_hat[0] + shift).epsilon(1e-6));
      const EstimationResult base_ls = mlqe(d, locscale, q);
      const EstimationResult move_ls = mlqe(shifted, locscale, q);
      CHECK(move_ls.theta_hat[0] == doctest::Approx(base_ls.theta_hat[0] + shift).epsilon(1e-6));
      CHECK(move_ls.theta_hat[1] == doctest::Approx(base_ls.theta_hat[1]).epsilon(1e-6));
    }
  }
}

TEST_CASE("weights decrease with fitted density for q < 1") {
  NormalKnownVariance fam(1.0);
  const GrossErrorModel model(fam, vec1(0.0), NormalComponent::univariate(0.0, 25.0), 0.2);
  const MatrixXd d = model.sample(60, 17);
  const LqParam q{0.7};
  const EstimationResult r = mlqe(d, fam, q);
  CHECK(r.converged);
  for (int i = 0; i < 60; ++i)
    for (int j = 0; j < 60; ++j) {
      const double fi = fam.density(d.col(i), r.theta_hat);
      const double fj = fam.density(d.col(j), r.theta_hat);
      if (fi < fj) CHECK(r.weights[i] < r.weights[j]);
    }
}

TEST_CASE("stationarity: score sum vanishes at the fit") {
  NormalLocationScale fam;
  const VectorXd truth = (Eigen::VectorXd(2) << 0.3, 1.0).finished();
  const GrossErrorModel model(fam, truth, NormalComponent::univariate(0.3, 50.0), 0.1);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd d = model.sample(50, 600 + trial);
    for (double qv : {0.55, 0.8, 1.0}) {
      const EstimationResult r = mlqe(d, fam, LqParam{qv});
      REQUIRE(r.converged);
      const VectorXd sn = score_sum(fam, d, r.theta_hat, LqParam{qv});
      CHECK(sn.cwiseAbs().maxCoeff() < 1e-5);
    }
  }
}

TEST_CASE("non-convergence carries the trace") {
  NormalLocationScale fam;
  Rng rng(4);
  MatrixXd d(1, 50);
  for (int i = 0; i < 50; ++i) d(0, i) = rng.normal(0.0, 1.0);
  MlqeOptions options;
  options.max_iter = 1;  // force an unfinished run
  options.multistart = 0;
  options.init = (Eigen::VectorXd(2) << 25.0, 40.0).finished();
  const EstimationResult r = mlqe(d, fam, LqParam{0.5}, options);
  CHECK_FALSE(r.converged);
  CHECK_FALSE(r.failure.empty());
  CHECK(r.trace.size() >= 1);
}
