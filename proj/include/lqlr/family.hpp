#pragma once

#include <Eigen/Dense>

#include <limits>
#include <string>
#include <vector>

#include "lqlr/lq.hpp"
#include "lqlr/rng.hpp"

namespace lqlr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Observation support, per coordinate (all three concrete families live on
// the whole real line).
struct Support {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

// Parametric model f(x; theta) with the theta-derivatives the Lq machinery
// needs. Observations are column vectors; a dataset is an (obs_dim x n)
// matrix holding one observation per column.
//
// hess_over_density returns f''/f = s s^T + ds/dtheta (s the score). Keeping
// that ratio in closed form lets psi'_q stay finite where the density itself
// underflows.
class ParametricFamily {
 public:
  virtual ~ParametricFamily() = default;

  virtual std::string name() const = 0;
  virtual int theta_dim() const = 0;
  virtual int obs_dim() const = 0;
  virtual Support support() const { return {}; }

  virtual double log_density(const VectorXd& x, const VectorXd& theta) const = 0;
  virtual VectorXd score(const VectorXd& x, const VectorXd& theta) const = 0;
  virtual MatrixXd hess_over_density(const VectorXd& x, const VectorXd& theta) const = 0;

  double density(const VectorXd& x, const VectorXd& theta) const {
    return std::exp(log_density(x, theta));
  }
  VectorXd density_grad(const VectorXd& x, const VectorXd& theta) const {
    return density(x, theta) * score(x, theta);
  }
  MatrixXd density_hess(const VectorXd& x, const VectorXd& theta) const {
    return density(x, theta) * hess_over_density(x, theta);
  }

  // Dataset-vectorized paths; the defaults loop, concrete families override
  // the univariate hot paths with array expressions.
  virtual VectorXd log_density_all(const MatrixXd& data, const VectorXd& theta) const;
  virtual MatrixXd score_all(const MatrixXd& data, const VectorXd& theta) const;

  // Exact maximizer of sum_i w_i log f(x_i; theta) with masked coordinates
  // pinned at the values in theta_fixed. All three families admit closed
  // forms, which is what makes the reweighting iteration cheap.
  virtual VectorXd weighted_mle(const MatrixXd& data, const VectorXd& w,
                                const std::vector<bool>& fixed_mask,
                                const VectorXd& theta_fixed) const = 0;

  // Robust starting point (medians / MAD scale).
  virtual VectorXd robust_init(const MatrixXd& data) const = 0;

  // Observation coordinate shifted one-for-one by theta coordinate j, or -1
  // when j is not a location parameter.
  virtual int location_coordinate(int theta_index) const = 0;

  virtual VectorXd draw(const VectorXd& theta, Rng& rng) const = 0;
};

// Scalar Gaussian with fixed sigma; theta = (mu).
class NormalKnownVariance final : public ParametricFamily {
 public:
  explicit NormalKnownVariance(double sigma);

  std::string name() const override { return "normal_known_variance"; }
  int theta_dim() const override { return 1; }
  int obs_dim() const override { return 1; }
  double sigma() const { return sigma_; }

  double log_density(const VectorXd& x, const VectorXd& theta) const override;
  VectorXd score(const VectorXd& x, const VectorXd& theta) const override;
  MatrixXd hess_over_density(const VectorXd& x, const VectorXd& theta) const override;
  VectorXd log_density_all(const MatrixXd& data, const VectorXd& theta) const override;
  MatrixXd score_all(const MatrixXd& data, const VectorXd& theta) const override;
  VectorXd weighted_mle(const MatrixXd& data, const VectorXd& w,
                        const std::vector<bool>& fixed_mask,
                        const VectorXd& theta_fixed) const override;
  VectorXd robust_init(const MatrixXd& data) const override;
  int location_coordinate(int theta_index) const override {
    return theta_index == 0 ? 0 : -1;
  }
  VectorXd draw(const VectorXd& theta, Rng& rng) const override;

 private:
  double sigma_;
  double log_norm_;  // -log(sigma * sqrt(2 pi))
};

// Scalar Gaussian; theta = (mu, sigma).
class NormalLocationScale final : public ParametricFamily {
 public:
  explicit NormalLocationScale(double sigma_floor = 1e-6);

  std::string name() const override { return "normal_location_scale"; }
  int theta_dim() const override { return 2; }
  int obs_dim() const override { return 1; }
  double sigma_floor() const { return sigma_floor_; }

  double log_density(const VectorXd& x, const VectorXd& theta) const override;
  VectorXd score(const VectorXd& x, const VectorXd& theta) const override;
  MatrixXd hess_over_density(const VectorXd& x, const VectorXd& theta) const override;
  VectorXd log_density_all(const MatrixXd& data, const VectorXd& theta) const override;
  MatrixXd score_all(const MatrixXd& data, const VectorXd& theta) const override;
  VectorXd weighted_mle(const MatrixXd& data, const VectorXd& w,
                        const std::vector<bool>& fixed_mask,
                        const VectorXd& theta_fixed) const override;
  VectorXd robust_init(const MatrixXd& data) const override;
  int location_coordinate(int theta_index) const override {
    return theta_index == 0 ? 0 : -1;
  }
  VectorXd draw(const VectorXd& theta, Rng& rng) const override;

 private:
  double sigma_floor_;
};

// R^d Gaussian with fixed covariance; theta = mu.
class MultivariateNormalKnownCovariance final : public ParametricFamily {
 public:
  explicit MultivariateNormalKnownCovariance(MatrixXd covariance);

  std::string name() const override { return "mvn_known_covariance"; }
  int theta_dim() const override { return static_cast<int>(covariance_.rows()); }
  int obs_dim() const override { return static_cast<int>(covariance_.rows()); }
  const MatrixXd& covariance() const { return covariance_; }

  double log_density(const VectorXd& x, const VectorXd& theta) const override;
  VectorXd score(const VectorXd& x, const VectorXd& theta) const override;
  MatrixXd hess_over_density(const VectorXd& x, const VectorXd& theta) const override;
  VectorXd log_density_all(const MatrixXd& data, const VectorXd& theta) const override;
  MatrixXd score_all(const MatrixXd& data, const VectorXd& theta) const override;
  VectorXd weighted_mle(const MatrixXd& data, const VectorXd& w,
                        const std::vector<bool>& fixed_mask,
                        const VectorXd& theta_fixed) const override;
  VectorXd robust_init(const MatrixXd& data) const override;
  int location_coordinate(int theta_index) const override { return theta_index; }
  VectorXd draw(const VectorXd& theta, Rng& rng) const override;

 private:
  MatrixXd covariance_;
  MatrixXd precision_;
  MatrixXd chol_lower_;
  double log_norm_;
};

// --- Lq score functions (Definition: psi_q = d/dtheta L_q(f), psi'_q its
// theta-Hessian). Both stay bounded in x for q < 1 because of the f^(1-q)
// factor. ---

// psi_q(x; theta) = score(x, theta) * f(x; theta)^(1-q)
VectorXd psi_q(const ParametricFamily& fam, const VectorXd& x, const VectorXd& theta,
               LqParam q);

// psi'_q(x; theta) = f^(1-q) * [f''/f - q * score score^T]; symmetric.
MatrixXd psi_q_prime(const ParametricFamily& fam, const VectorXd& x,
                     const VectorXd& theta, LqParam q);

// S_n = sum_i psi_q(x_i; theta)
VectorXd score_sum(const ParametricFamily& fam, const MatrixXd& data,
                   const VectorXd& theta, LqParam q);

// sum_i L_q(f(x_i; theta)), with the density-floor policy.
double lq_likelihood(const ParametricFamily& fam, const MatrixXd& data,
                     const VectorXd& theta, LqParam q);

// Wraps a flat sample of scalar observations as a (1 x n) dataset view.
inline Eigen::Map<const MatrixXd> as_dataset(const VectorXd& sample) {
  return Eigen::Map<const MatrixXd>(sample.data(), 1, sample.size());
}

}  // namespace lqlr
