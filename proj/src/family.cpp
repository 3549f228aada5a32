#include "lqlr/family.hpp"

#include <cmath>
#include <stdexcept>

#include "lqlr/prob.hpp"

namespace lqlr {

namespace {

double weighted_mean(const Eigen::Ref<const VectorXd>& x, const VectorXd& w) {
  return x.dot(w) / w.sum();
}

}  // namespace

VectorXd ParametricFamily::log_density_all(const MatrixXd& data, const VectorXd& theta) const {
  VectorXd out(data.cols());
  for (Eigen::Index i = 0; i < data.cols(); ++i) out[i] = log_density(data.col(i), theta);
  return out;
}

MatrixXd ParametricFamily::score_all(const MatrixXd& data, const VectorXd& theta) const {
  MatrixXd out(theta_dim(), data.cols());
  for (Eigen::Index i = 0; i < data.cols(); ++i) out.col(i) = score(data.col(i), theta);
  return out;
}

// ---------------------------------------------------------------- NormalKnownVariance

NormalKnownVariance::NormalKnownVariance(double sigma) : sigma_(sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("NormalKnownVariance: sigma must be > 0");
  log_norm_ = -std::log(sigma_ * kSqrt2Pi);
}

double NormalKnownVariance::log_density(const VectorXd& x, const VectorXd& theta) const {
  const double z = (x[0] - theta[0]) / sigma_;
  return log_norm_ - 0.5 * z * z;
}

VectorXd NormalKnownVariance::score(const VectorXd& x, const VectorXd& theta) const {
  VectorXd s(1);
  s[0] = (x[0] - theta[0]) / (sigma_ * sigma_);
  return s;
}

MatrixXd NormalKnownVariance::hess_over_density(const VectorXd& x, const VectorXd& theta) const {
  const double s = (x[0] - theta[0]) / (sigma_ * sigma_);
  MatrixXd h(1, 1);
  h(0, 0) = s * s - 1.0 / (sigma_ * sigma_);
  return h;
}

VectorXd NormalKnownVariance::log_density_all(const MatrixXd& data, const VectorXd& theta) const {
  return (log_norm_ -
          0.5 / (sigma_ * sigma_) * (data.row(0).transpose().array() - theta[0]).square())
      .matrix();
}

MatrixXd NormalKnownVariance::score_all(const MatrixXd& data, const VectorXd& theta) const {
  return ((data.row(0).array() - theta[0]) / (sigma_ * sigma_)).matrix();
}

VectorXd NormalKnownVariance::weighted_mle(const MatrixXd& data, const VectorXd& w,
                                           const std::vector<bool>& fixed_mask,
                                           const VectorXd& theta_fixed) const {
  VectorXd theta(1);
  theta[0] = (!fixed_mask.empty() && fixed_mask[0]) ? theta_fixed[0]
                                                    : weighted_mean(data.row(0), w);
  return theta;
}

VectorXd NormalKnownVariance::robust_init(const MatrixXd& data) const {
  VectorXd theta(1);
  std::vector<double> v(data.row(0).begin(), data.row(0).end());
  theta[0] = median_of(std::move(v));
  return theta;
}

VectorXd NormalKnownVariance::draw(const VectorXd& theta, Rng& rng) const {
  VectorXd x(1);
  x[0] = rng.normal(theta[0], sigma_);
  return x;
}

// ---------------------------------------------------------------- NormalLocationScale

NormalLocationScale::NormalLocationScale(double sigma_floor) : sigma_floor_(sigma_floor) {}

double NormalLocationScale::log_density(const VectorXd& x, const VectorXd& theta) const {
  const double z = (x[0] - theta[0]) / theta[1];
  return -std::log(theta[1] * kSqrt2Pi) - 0.5 * z * z;
}

VectorXd NormalLocationScale::score(const VectorXd& x, const VectorXd& theta) const {
  const double sigma = theta[1];
  const double z = (x[0] - theta[0]) / sigma;
  VectorXd s(2);
  s[0] = z / sigma;
  s[1] = (z * z - 1.0) / sigma;
  return s;
}

MatrixXd NormalLocationScale::hess_over_density(const VectorXd& x, const VectorXd& theta) const {
  const double sigma = theta[1];
  const double z = (x[0] - theta[0]) / sigma;
  // f''/f = s s^T + J, J the Jacobian of the score in theta.
  MatrixXd h(2, 2);
  const double s_mu = z / sigma;
  const double s_sg = (z * z - 1.0) / sigma;
  h(0, 0) = s_mu * s_mu - 1.0 / (sigma * sigma);
  h(0, 1) = s_mu * s_sg - 2.0 * z / (sigma * sigma);
  h(1, 0) = h(0, 1);
  h(1, 1) = s_sg * s_sg + (1.0 - 3.0 * z * z) / (sigma * sigma);
  return h;
}

VectorXd NormalLocationScale::log_density_all(const MatrixXd& data, const VectorXd& theta) const {
  const double sigma = theta[1];
  return (-std::log(sigma * kSqrt2Pi) -
          0.5 / (sigma * sigma) * (data.row(0).transpose().array() - theta[0]).square())
      .matrix();
}

MatrixXd NormalLocationScale::score_all(const MatrixXd& data, const VectorXd& theta) const {
  const double sigma = theta[1];
  MatrixXd out(2, data.cols());
  const auto z = (data.row(0).array() - theta[0]) / sigma;
  out.row(0) = (z / sigma).matrix();
  out.row(1) = ((z.square() - 1.0) / sigma).matrix();
  return out;
}

VectorXd NormalLocationScale::weighted_mle(const MatrixXd& data, const VectorXd& w,
                                           const std::vector<bool>& fixed_mask,
                                           const VectorXd& theta_fixed) const {
  const bool mu_fixed = !fixed_mask.empty() && fixed_mask[0];
  const bool sigma_fixed = fixed_mask.size() > 1 && fixed_mask[1];
  VectorXd theta(2);
  theta[0] = mu_fixed ? theta_fixed[0] : weighted_mean(data.row(0), w);
  if (sigma_fixed) {
    theta[1] = theta_fixed[1];
  } else {
    const double ss =
        (data.row(0).transpose().array() - theta[0]).square().matrix().dot(w) / w.sum();
    theta[1] = std::max(std::sqrt(ss), sigma_floor_);
  }
  return theta;
}

VectorXd NormalLocationScale::robust_init(const MatrixXd& data) const {
  std::vector<double> v(data.row(0).begin(), data.row(0).end());
  const double med = median_of(v);
  for (double& u : v) u = std::fabs(u - med);
  const double mad = median_of(std::move(v));
  VectorXd theta(2);
  theta[0] = med;
  theta[1] = std::max(1.4826 * mad, sigma_floor_);
  return theta;
}

VectorXd NormalLocationScale::draw(const VectorXd& theta, Rng& rng) const {
  VectorXd x(1);
  x[0] = rng.normal(theta[0], theta[1]);
  return x;
}

// ------------------------------------------- MultivariateNormalKnownCovariance

MultivariateNormalKnownCovariance::MultivariateNormalKnownCovariance(MatrixXd covariance)
    : covariance_(std::move(covariance)) {
  if (covariance_.rows() != covariance_.cols() || covariance_.rows() < 1)
    throw std::invalid_argument("MultivariateNormalKnownCovariance: covariance must be square");
  Eigen::LLT<MatrixXd> llt(covariance_);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument(
        "MultivariateNormalKnownCovariance: covariance must be positive definite");
  chol_lower_ = llt.matrixL();
  precision_ = llt.solve(MatrixXd::Identity(covariance_.rows(), covariance_.cols()));
  const double logdet = 2.0 * chol_lower_.diagonal().array().log().sum();
  log_norm_ = -0.5 * (covariance_.rows() * std::log(2.0 * M_PI) + logdet);
}

double MultivariateNormalKnownCovariance::log_density(const VectorXd& x,
                                                      const VectorXd& theta) const {
  const VectorXd d = x - theta;
  return log_norm_ - 0.5 * d.dot(precision_ * d);
}

VectorXd MultivariateNormalKnownCovariance::score(const VectorXd& x, const VectorXd& theta) const {
  return precision_ * (x - theta);
}

MatrixXd MultivariateNormalKnownCovariance::hess_over_density(const VectorXd& x,
                                                              const VectorXd& theta) const {
  const VectorXd s = precision_ * (x - theta);
  return s * s.transpose() - precision_;
}

VectorXd MultivariateNormalKnownCovariance::log_density_all(const MatrixXd& data,
                                                            const VectorXd& theta) const {
  const MatrixXd centered = data.colwise() - theta;
  const MatrixXd pd = precision_ * centered;
  return (log_norm_ - 0.5 * (centered.array() * pd.array()).colwise().sum().transpose()).matrix();
}

MatrixXd MultivariateNormalKnownCovariance::score_all(const MatrixXd& data,
                                                      const VectorXd& theta) const {
  return precision_ * (data.colwise() - theta);
}

VectorXd MultivariateNormalKnownCovariance::weighted_mle(const MatrixXd& data, const VectorXd& w,
                                                         const std::vector<bool>& fixed_mask,
                                                         const VectorXd& theta_fixed) const {
  const int p = theta_dim();
  const VectorXd xbar = data * w / w.sum();
  std::vector<int> free_idx, fixed_idx;
  for (int j = 0; j < p; ++j) {
    if (j < static_cast<int>(fixed_mask.size()) && fixed_mask[j])
      fixed_idx.push_back(j);
    else
      free_idx.push_back(j);
  }
  VectorXd theta(p);
  for (int j : fixed_idx) theta[j] = theta_fixed[j];
  if (free_idx.empty()) return theta;
  if (fixed_idx.empty()) return xbar;
  // Stationarity in the free block: P_bb mu_b = P_bb xbar_b + P_ba (xbar_a - mu_a).
  const int nf = static_cast<int>(free_idx.size());
  const int na = static_cast<int>(fixed_idx.size());
  MatrixXd pbb(nf, nf), pba(nf, na);
  VectorXd xb(nf), da(na);
  for (int i = 0; i < nf; ++i) {
    xb[i] = xbar[free_idx[i]];
    for (int j = 0; j < nf; ++j) pbb(i, j) = precision_(free_idx[i], free_idx[j]);
    for (int j = 0; j < na; ++j) pba(i, j) = precision_(free_idx[i], fixed_idx[j]);
  }
  for (int j = 0; j < na; ++j) da[j] = xbar[fixed_idx[j]] - theta_fixed[fixed_idx[j]];
  const VectorXd mub = xb + pbb.llt().solve(pba * da);
  for (int i = 0; i < nf; ++i) theta[free_idx[i]] = mub[i];
  return theta;
}

VectorXd MultivariateNormalKnownCovariance::robust_init(const MatrixXd& data) const {
  VectorXd theta(theta_dim());
  for (int j = 0; j < theta_dim(); ++j) {
    std::vector<double> v(data.row(j).begin(), data.row(j).end());
    theta[j] = median_of(std::move(v));
  }
  return theta;
}

VectorXd MultivariateNormalKnownCovariance::draw(const VectorXd& theta, Rng& rng) const {
  VectorXd z(obs_dim());
  for (int j = 0; j < obs_dim(); ++j) z[j] = rng.normal();
  return theta + chol_lower_ * z;
}

// ---------------------------------------------------------------- Lq score functions

VectorXd psi_q(const ParametricFamily& fam, const VectorXd& x, const VectorXd& theta, LqParam q) {
  const double logf = fam.log_density(x, theta);
  if (!std::isfinite(logf)) return VectorXd::Zero(fam.theta_dim());
  return lq_weight_from_log(logf, q) * fam.score(x, theta);
}

MatrixXd psi_q_prime(const ParametricFamily& fam, const VectorXd& x, const VectorXd& theta,
                     LqParam q) {
  const double logf = fam.log_density(x, theta);
  if (!std::isfinite(logf)) return MatrixXd::Zero(fam.theta_dim(), fam.theta_dim());
  const VectorXd s = fam.score(x, theta);
  return lq_weight_from_log(logf, q) *
         (fam.hess_over_density(x, theta) - q.value * s * s.transpose());
}

VectorXd score_sum(const ParametricFamily& fam, const MatrixXd& data, const VectorXd& theta,
                   LqParam q) {
  const VectorXd logf = fam.log_density_all(data, theta);
  const MatrixXd scores = fam.score_all(data, theta);
  if (q.is_one()) return scores.rowwise().sum();
  const VectorXd w = ((1.0 - q.value) * logf.array()).exp().matrix();
  return scores * w;
}

double lq_likelihood(const ParametricFamily& fam, const MatrixXd& data, const VectorXd& theta,
                     LqParam q) {
  const VectorXd logf = fam.log_density_all(data, theta);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logf.size(); ++i) total += lq_transform_from_log(logf[i], q);
  return total;
}

}  // namespace lqlr
