#include "lqlr/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lqlr/prob.hpp"
#include "lqlr/quadrature.hpp"
#include "lqlr/rng.hpp"

namespace lqlr {

namespace {

// Scalar observation scale of the ideal component, for integration ranges.
double family_scale(const ParametricFamily& fam, const VectorXd& theta) {
  if (fam.name() == "normal_known_variance")
    return static_cast<const NormalKnownVariance&>(fam).sigma();
  if (fam.name() == "normal_location_scale") return theta[1];
  return 1.0;
}

struct QuadDomain {
  double lo, hi;
  std::vector<double> breakpoints;
};

QuadDomain mixture_domain(const GrossErrorModel& model, const VectorXd& theta) {
  const double sf = family_scale(model.family(), model.theta_f());
  const double sg = std::sqrt(model.contamination().covariance()(0, 0));
  const double smax = std::max(sf, sg);
  const double cf = model.theta_f()[0];
  const double cg = model.contamination().mean()[0];
  const double ct = theta[0];
  QuadDomain d;
  d.lo = std::min({cf, cg, ct}) - 40.0 * smax;
  d.hi = std::max({cf, cg, ct}) + 40.0 * smax;
  for (double k : {0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    for (double s : {sf, sg}) {
      for (double c : {cf, cg, ct}) {
        d.breakpoints.push_back(c + k * s);
        d.breakpoints.push_back(c - k * s);
      }
    }
  }
  return d;
}

struct Moments {
  MatrixXd psi_sq;    // E_h[psi psi^T]
  MatrixXd psi_prime; // E_h[psi'_q]
};

Moments expected_psi_moments(const GrossErrorModel& model, const VectorXd& theta, LqParam q,
                             const ExpectationOptions& options, ExpectationMeta* meta) {
  const ParametricFamily& fam = model.family();
  const int p = fam.theta_dim();

  if (options.method == ExpectationMethod::Quadrature) {
    if (fam.obs_dim() != 1)
      throw std::invalid_argument("sandwich: quadrature requires univariate observations");
    const QuadDomain dom = mixture_domain(model, theta);
    auto integrand = [&](double x) {
      VectorXd xv(1);
      xv[0] = x;
      const double h = model.density(xv);
      const VectorXd ps = psi_q(fam, xv, theta, q);
      const MatrixXd pp = psi_q_prime(fam, xv, theta, q);
      VectorXd out(2 * p * p);
      Eigen::Map<MatrixXd>(out.data(), p, p) = h * (ps * ps.transpose());
      Eigen::Map<MatrixXd>(out.data() + p * p, p, p) = h * pp;
      return out;
    };
    const VectorXd raw =
        VectorQuadrature::integrate(integrand, dom.lo, dom.hi, options.quad_tol, dom.breakpoints);
    if (meta) {
      meta->method = ExpectationMethod::Quadrature;
      meta->tol = options.quad_tol;
    }
    Moments m;
    m.psi_sq = Eigen::Map<const MatrixXd>(raw.data(), p, p);
    m.psi_prime = Eigen::Map<const MatrixXd>(raw.data() + p * p, p, p);
    return m;
  }

  // Monte Carlo under h, seed-deterministic.
  Rng rng(derive_seed(options.mc_seed, {0xabcdefULL}));
  MatrixXd acc_sq = MatrixXd::Zero(p, p);
  MatrixXd acc_prime = MatrixXd::Zero(p, p);
  VectorXd x(fam.obs_dim());
  const double eps = model.epsilon();
  for (std::int64_t i = 0; i < options.mc_draws; ++i) {
    if (eps > 0.0 && rng.bernoulli(eps))
      x = model.contamination().draw(rng);
    else
      x = fam.draw(model.theta_f(), rng);
    const VectorXd ps = psi_q(fam, x, theta, q);
    acc_sq.noalias() += ps * ps.transpose();
    acc_prime += psi_q_prime(fam, x, theta, q);
  }
  if (meta) {
    meta->method = ExpectationMethod::MonteCarlo;
    meta->draws = options.mc_draws;
    meta->seed = options.mc_seed;
  }
  Moments m;
  m.psi_sq = acc_sq / static_cast<double>(options.mc_draws);
  m.psi_prime = acc_prime / static_cast<double>(options.mc_draws);
  return m;
}

}  // namespace

SandwichMatrices sandwich(const GrossErrorModel& model, const VectorXd& theta, LqParam q, int r,
                          const ExpectationOptions& options) {
  const ParametricFamily& fam = model.family();
  const int p = fam.theta_dim();
  if (r < 1 || r > p) throw std::invalid_argument("sandwich: r must be in [1, p]");
  if (theta.size() != p) throw std::invalid_argument("sandwich: theta dimension mismatch");

  SandwichMatrices out;
  out.r = r;
  const Moments m = expected_psi_moments(model, theta, q, options, &out.meta);
  out.A = 0.5 * (m.psi_sq + m.psi_sq.transpose());
  out.B = -0.5 * (m.psi_prime + m.psi_prime.transpose());

  Eigen::SelfAdjointEigenSolver<MatrixXd> b_eigen(out.B);
  const VectorXd b_vals = b_eigen.eigenvalues();
  const double b_min = b_vals.minCoeff(), b_max = b_vals.maxCoeff();
  out.b_condition = b_min > 0.0 ? b_max / b_min : std::numeric_limits<double>::infinity();
  if (!(b_min > 1e-12 * std::max(1.0, b_max)))
    throw std::runtime_error("sandwich: B is singular (condition " +
                             std::to_string(out.b_condition) + ")");

  out.B_star = MatrixXd::Zero(p, p);
  if (r < p) {
    const MatrixXd b_bb = out.B.bottomRightCorner(p - r, p - r);
    out.B_star.bottomRightCorner(p - r, p - r) =
        b_bb.llt().solve(MatrixXd::Identity(p - r, p - r));
  }

  // Eigenvalues of A (B^{-1} - B*) via the symmetric congruence
  // A^{1/2} (B^{-1} - B*) A^{1/2}, which keeps them real.
  Eigen::SelfAdjointEigenSolver<MatrixXd> a_eigen(out.A);
  const VectorXd a_vals = a_eigen.eigenvalues().cwiseMax(0.0);
  const MatrixXd a_half =
      a_eigen.eigenvectors() * a_vals.cwiseSqrt().asDiagonal() * a_eigen.eigenvectors().transpose();
  const MatrixXd b_inv = out.B.llt().solve(MatrixXd::Identity(p, p));
  const MatrixXd core = a_half * (b_inv - out.B_star) * a_half;
  Eigen::SelfAdjointEigenSolver<MatrixXd> core_eigen(0.5 * (core + core.transpose()));

  std::vector<double> positive;
  for (int j = 0; j < p; ++j)
    if (core_eigen.eigenvalues()[j] > 1e-8) positive.push_back(core_eigen.eigenvalues()[j]);
  std::sort(positive.rbegin(), positive.rend());
  if (static_cast<int>(positive.size()) > r) positive.resize(r);
  out.lambdas = Eigen::Map<const VectorXd>(positive.data(), positive.size());
  return out;
}

std::vector<RatioPoint> ratio_surface(const ParametricFamily& fam, const VectorXd& theta,
                                      const NormalComponent& g, const std::vector<double>& eps_grid,
                                      const std::vector<double>& q_grid, double quad_tol) {
  if (fam.theta_dim() != 1)
    throw std::invalid_argument("ratio_surface: scalar-parameter families only");
  std::vector<RatioPoint> rows;
  rows.reserve(eps_grid.size() * q_grid.size());
  ExpectationOptions opts;
  opts.method = ExpectationMethod::Quadrature;
  opts.quad_tol = quad_tol;
  for (double eps : eps_grid) {
    const GrossErrorModel model(fam, theta, g, eps);
    for (double qv : q_grid) {
      const SandwichMatrices s = sandwich(model, theta, LqParam{qv}, 1, opts);
      rows.push_back({eps, qv, s.A(0, 0) / s.B(0, 0)});
    }
  }
  return rows;
}

WeightedChiSquared::WeightedChiSquared(VectorXd lambdas, std::int64_t draws, std::uint64_t seed) {
  if (lambdas.size() == 0) throw std::invalid_argument("WeightedChiSquared: no eigenvalues");
  if (draws < 1000) throw std::invalid_argument("WeightedChiSquared: too few draws");
  Rng rng(derive_seed(seed, {0x77c5ULL}));
  sorted_.resize(static_cast<std::size_t>(draws));
  for (auto& v : sorted_) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < lambdas.size(); ++j) {
      const double z = rng.normal();
      s += lambdas[j] * z * z;
    }
    v = s;
  }
  all_ = sorted_;
  std::sort(sorted_.begin(), sorted_.end());
}

double WeightedChiSquared::quantile(double prob) const {
  if (!(prob > 0.0 && prob < 1.0))
    throw std::invalid_argument("WeightedChiSquared::quantile: prob in (0,1)");
  return quantile_type7(sorted_, prob);
}

double WeightedChiSquared::quantile_stderr(double prob) const {
  const std::size_t n = all_.size();
  const std::size_t per = n / batches_;
  std::vector<double> batch_q(batches_);
  std::vector<double> buf;
  for (int b = 0; b < batches_; ++b) {
    buf.assign(all_.begin() + b * per, all_.begin() + (b + 1) * per);
    std::sort(buf.begin(), buf.end());
    batch_q[b] = quantile_type7(buf, prob);
  }
  double mean = 0.0;
  for (double v : batch_q) mean += v;
  mean /= batches_;
  double ss = 0.0;
  for (double v : batch_q) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (batches_ - 1.0) / batches_);
}

double WeightedChiSquared::cdf(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double WeightedChiSquared::cdf_stderr(double x) const {
  const double p = cdf(x);
  return std::sqrt(p * (1.0 - p) / static_cast<double>(sorted_.size()));
}

double weighted_chisq_quantile(const VectorXd& lambdas, double prob, std::int64_t draws,
                               std::uint64_t seed) {
  return WeightedChiSquared(lambdas, draws, seed).quantile(prob);
}

double weighted_chisq_cdf(const VectorXd& lambdas, double x, std::int64_t draws,
                          std::uint64_t seed) {
  return WeightedChiSquared(lambdas, draws, seed).cdf(x);
}

AsymptoticSummary asymptotic_summary(const GrossErrorModel& model, const VectorXd& theta0,
                                     LqParam q, double delta, double alpha, bool allow_asymmetric,
                                     double quad_tol) {
  const ParametricFamily& fam = model.family();
  if (fam.theta_dim() != 1)
    throw std::invalid_argument("asymptotic_summary: scalar location parameter only");
  const double loc = theta0[0];
  const bool f_centered = std::fabs(model.theta_f()[0] - loc) <= 1e-9 * (1.0 + std::fabs(loc));
  const bool g_centered =
      std::fabs(model.contamination().mean()[0] - loc) <= 1e-9 * (1.0 + std::fabs(loc));
  if (!allow_asymmetric && (!f_centered || !g_centered))
    throw std::invalid_argument(
        "asymptotic_summary: f and g must be symmetric about theta0 (set allow_asymmetric to "
        "override)");

  ExpectationOptions opts;
  opts.method = ExpectationMethod::Quadrature;
  opts.quad_tol = quad_tol;

  const SandwichMatrices sq = sandwich(model, theta0, q, 1, opts);
  const double v_q = sq.A(0, 0) / (sq.B(0, 0) * sq.B(0, 0));
  const SandwichMatrices s1 = sandwich(model, theta0, LqParam{1.0}, 1, opts);
  const double v_1 = s1.A(0, 0) / (s1.B(0, 0) * s1.B(0, 0));

  AsymptoticSummary out;
  out.v_q = v_q;
  out.u_q = loc;  // u_q(theta) = theta under symmetry, so u'_q = 1
  out.efficacy = 1.0 / std::sqrt(v_q);
  out.limiting_power = normal_cdf(delta * out.efficacy - normal_quantile(1.0 - alpha));
  out.relative_efficiency = v_1 / v_q;
  return out;
}

namespace {

double clean_b_scalar(const ParametricFamily& fam, const VectorXd& theta, LqParam q,
                      double quad_tol) {
  const double scale = family_scale(fam, theta);
  const double c = theta[0];
  std::vector<double> breaks;
  for (double k : {0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    breaks.push_back(c + k * scale);
    breaks.push_back(c - k * scale);
  }
  auto integrand = [&](double x) -> double {
    VectorXd xv(1);
    xv[0] = x;
    return -fam.density(xv, theta) * psi_q_prime(fam, xv, theta, q)(0, 0);
  };
  return scalar_quadrature(integrand, c - 40.0 * scale, c + 40.0 * scale, quad_tol, breaks);
}

}  // namespace

std::vector<CurvePoint> influence_function(const ParametricFamily& fam, const VectorXd& theta,
                                           LqParam q, const std::vector<double>& x_grid,
                                           double quad_tol) {
  if (fam.theta_dim() != 1)
    throw std::invalid_argument("influence_function: scalar-parameter families only");
  const double b0 = clean_b_scalar(fam, theta, q, quad_tol);
  std::vector<CurvePoint> curve;
  curve.reserve(x_grid.size());
  VectorXd xv(1);
  for (double x : x_grid) {
    xv[0] = x;
    curve.push_back({x, psi_q(fam, xv, theta, q)[0] / b0});
  }
  return curve;
}

std::vector<CurvePoint> level_influence(const ParametricFamily& fam, const VectorXd& theta,
                                        LqParam q, double alpha0,
                                        const std::vector<double>& x_grid, double quad_tol) {
  if (fam.theta_dim() != 1)
    throw std::invalid_argument("level_influence: scalar-parameter families only");
  const double b0 = clean_b_scalar(fam, theta, q, quad_tol);
  const double scale = family_scale(fam, theta);
  const double c = theta[0];
  std::vector<double> breaks;
  for (double k : {0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    breaks.push_back(c + k * scale);
    breaks.push_back(c - k * scale);
  }
  auto if_sq = [&](double x) -> double {
    VectorXd xv(1);
    xv[0] = x;
    const double v = psi_q(fam, xv, theta, q)[0] / b0;
    return v * v * fam.density(xv, theta);
  };
  const double norm =
      std::sqrt(scalar_quadrature(if_sq, c - 40.0 * scale, c + 40.0 * scale, quad_tol, breaks));
  const double front = normal_pdf(normal_quantile(1.0 - alpha0));
  std::vector<CurvePoint> curve;
  curve.reserve(x_grid.size());
  VectorXd xv(1);
  for (double x : x_grid) {
    xv[0] = x;
    curve.push_back({x, front * (psi_q(fam, xv, theta, q)[0] / b0) / norm});
  }
  return curve;
}

}  // namespace lqlr
