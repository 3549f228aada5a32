#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "lqlr/family.hpp"

namespace lqlr {

// Gaussian contamination component g, covering both the fat-tail and the
// near-point-mass cases used throughout. Parameterized by mean and
// covariance (variance in the scalar case).
class NormalComponent {
 public:
  NormalComponent(VectorXd mean, MatrixXd covariance);

  // Scalar convenience: g = N(mean, variance). Second argument is a
  // variance, matching the phi(x; mu, sigma^2) convention used everywhere in
  // this codebase.
  static NormalComponent univariate(double mean, double variance);

  int dim() const { return static_cast<int>(mean_.size()); }
  const VectorXd& mean() const { return mean_; }
  const MatrixXd& covariance() const { return covariance_; }

  double density(const VectorXd& x) const;
  double log_density(const VectorXd& x) const;
  VectorXd draw(Rng& rng) const;

 private:
  VectorXd mean_;
  MatrixXd covariance_;
  MatrixXd precision_;
  MatrixXd chol_lower_;
  double log_norm_;
};

// Gross error model h = (1 - eps) f(.; theta_f) + eps g. The data-generating
// truth for all contamination studies; eps = 0 degenerates to f.
class GrossErrorModel {
 public:
  GrossErrorModel(const ParametricFamily& f, VectorXd theta_f, NormalComponent g, double eps);

  const ParametricFamily& family() const { return *f_; }
  const VectorXd& theta_f() const { return theta_f_; }
  const NormalComponent& contamination() const { return g_; }
  double epsilon() const { return eps_; }

  double density(const VectorXd& x) const;

  // n draws, one per column; each draw comes from f with probability 1-eps.
  // Deterministic given seed. Optional labels record which component
  // produced each column (1 = contamination).
  MatrixXd sample(int n, std::uint64_t seed, std::vector<std::uint8_t>* labels = nullptr) const;

 private:
  const ParametricFamily* f_;
  VectorXd theta_f_;
  NormalComponent g_;
  double eps_;
};

inline double mixture_density(const GrossErrorModel& model, const VectorXd& x) {
  return model.density(x);
}

inline MatrixXd sample_mixture(const GrossErrorModel& model, int n, std::uint64_t seed,
                               std::vector<std::uint8_t>* labels = nullptr) {
  return model.sample(n, seed, labels);
}

}  // namespace lqlr
