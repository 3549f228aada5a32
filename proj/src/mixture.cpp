#include "lqlr/mixture.hpp"

#include <cmath>
#include <stdexcept>

#include "lqlr/prob.hpp"

namespace lqlr {

NormalComponent::NormalComponent(VectorXd mean, MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size())
    throw std::invalid_argument("NormalComponent: covariance/mean dimension mismatch");
  Eigen::LLT<MatrixXd> llt(covariance_);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("NormalComponent: covariance must be positive definite");
  chol_lower_ = llt.matrixL();
  precision_ = llt.solve(MatrixXd::Identity(mean_.size(), mean_.size()));
  const double logdet = 2.0 * chol_lower_.diagonal().array().log().sum();
  log_norm_ = -0.5 * (mean_.size() * std::log(2.0 * M_PI) + logdet);
}

NormalComponent NormalComponent::univariate(double mean, double variance) {
  VectorXd m(1);
  m[0] = mean;
  MatrixXd c(1, 1);
  c(0, 0) = variance;
  return NormalComponent(std::move(m), std::move(c));
}

double NormalComponent::log_density(const VectorXd& x) const {
  const VectorXd d = x - mean_;
  return log_norm_ - 0.5 * d.dot(precision_ * d);
}

double NormalComponent::density(const VectorXd& x) const { return std::exp(log_density(x)); }

VectorXd NormalComponent::draw(Rng& rng) const {
  VectorXd z(dim());
  for (int j = 0; j < dim(); ++j) z[j] = rng.normal();
  return mean_ + chol_lower_ * z;
}

GrossErrorModel::GrossErrorModel(const ParametricFamily& f, VectorXd theta_f, NormalComponent g,
                                 double eps)
    : f_(&f), theta_f_(std::move(theta_f)), g_(std::move(g)), eps_(eps) {
  if (!(eps >= 0.0 && eps < 1.0))
    throw std::invalid_argument("GrossErrorModel: eps must be in [0, 1)");
  if (theta_f_.size() != f.theta_dim())
    throw std::invalid_argument("GrossErrorModel: theta_f dimension mismatch");
  if (g_.dim() != f.obs_dim())
    throw std::invalid_argument("GrossErrorModel: contamination dimension mismatch");
}

double GrossErrorModel::density(const VectorXd& x) const {
  return (1.0 - eps_) * f_->density(x, theta_f_) + eps_ * g_.density(x);
}

MatrixXd GrossErrorModel::sample(int n, std::uint64_t seed,
                                 std::vector<std::uint8_t>* labels) const {
  if (n < 1) throw std::invalid_argument("GrossErrorModel::sample: n must be >= 1");
  Rng rng(seed);
  MatrixXd data(f_->obs_dim(), n);
  if (labels) labels->assign(n, 0);
  for (int i = 0; i < n; ++i) {
    if (eps_ > 0.0 && rng.bernoulli(eps_)) {
      data.col(i) = g_.draw(rng);
      if (labels) (*labels)[i] = 1;
    } else {
      data.col(i) = f_->draw(theta_f_, rng);
    }
  }
  return data;
}

}  // namespace lqlr
