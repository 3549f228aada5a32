#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "lqlr/mixture.hpp"

namespace lqlr {

enum class ExpectationMethod { Quadrature, MonteCarlo };

struct ExpectationOptions {
  ExpectationMethod method = ExpectationMethod::Quadrature;
  double quad_tol = 1e-8;
  std::int64_t mc_draws = 1'000'000;
  std::uint64_t mc_seed = 0;
};

struct ExpectationMeta {
  ExpectationMethod method = ExpectationMethod::Quadrature;
  std::int64_t draws = 0;   // Monte Carlo only
  std::uint64_t seed = 0;   // Monte Carlo only
  double tol = 0.0;         // quadrature only
};

// Sandwich matrices under the data-generating mixture h:
//   A = E_h[psi_q psi_q^T],  B = -E_h[psi'_q],
//   B* = block matrix with (B_bb)^{-1} in the free (nuisance) block,
// and the r positive eigenvalues of A (B^{-1} - B*), which weight the
// chi-square components of the asymptotic null law of D_q.
struct SandwichMatrices {
  MatrixXd A;
  MatrixXd B;
  MatrixXd B_star;
  int r = 0;
  VectorXd lambdas;  // descending, size r
  double b_condition = 0.0;
  ExpectationMeta meta;
};

// theta is the evaluation point of psi (the null parameter in the testing
// context). Univariate observations use adaptive quadrature; multivariate
// require Monte Carlo. Throws when B is numerically singular.
SandwichMatrices sandwich(const GrossErrorModel& model, const VectorXd& theta, LqParam q, int r,
                          const ExpectationOptions& options = {});

struct RatioPoint {
  double eps;
  double q;
  double ratio;  // A / B
};

// A(eps, q) / B(eps, q) over a grid, for a scalar-parameter family.
std::vector<RatioPoint> ratio_surface(const ParametricFamily& fam, const VectorXd& theta,
                                      const NormalComponent& g, const std::vector<double>& eps_grid,
                                      const std::vector<double>& q_grid,
                                      double quad_tol = 1e-8);

// Law of sum_j lambda_j Z_j^2 (Z_j iid standard normal) by seeded Monte
// Carlo. The same draws answer cdf and quantile queries, so the two are
// mutually consistent by construction. Standard errors come from 10-batch
// means.
class WeightedChiSquared {
 public:
  WeightedChiSquared(VectorXd lambdas, std::int64_t draws, std::uint64_t seed);

  double quantile(double prob) const;
  double quantile_stderr(double prob) const;
  double cdf(double x) const;
  double cdf_stderr(double x) const;
  std::int64_t draws() const { return static_cast<std::int64_t>(sorted_.size()); }

 private:
  std::vector<double> sorted_;
  std::vector<double> all_;  // insertion order, for batch-mean standard errors
  int batches_ = 10;
};

double weighted_chisq_quantile(const VectorXd& lambdas, double prob,
                               std::int64_t draws = 1'000'000, std::uint64_t seed = 0);
double weighted_chisq_cdf(const VectorXd& lambdas, double x, std::int64_t draws = 1'000'000,
                          std::uint64_t seed = 0);

// Local asymptotic testing summary for a symmetric location problem:
//   V_q = E_h[psi_q^2] / E_h[psi'_q]^2  (scalar, tested coordinate),
//   efficacy c_q = u'_q / sqrt(V_q) with u_q(theta) = theta under symmetry,
//   limiting power = Phi(c_q delta - z_{1-alpha}),
//   relative efficiency e_{q,1} = V_1 / V_q.
struct AsymptoticSummary {
  double v_q = 0.0;
  double u_q = 0.0;       // expected MLqE at theta0 (= theta0 under symmetry)
  double efficacy = 0.0;  // c_q
  double limiting_power = 0.0;
  double relative_efficiency = 0.0;  // e_{q,1}
};

// Requires f and g symmetric about theta0 (Theorem hypothesis); refuses an
// asymmetric contamination unless allow_asymmetric is set.
AsymptoticSummary asymptotic_summary(const GrossErrorModel& model, const VectorXd& theta0,
                                     LqParam q, double delta, double alpha,
                                     bool allow_asymmetric = false, double quad_tol = 1e-8);

struct CurvePoint {
  double x;
  double value;
};

// Influence function of the MLqE at the clean model F = f(.; theta):
// IF(x) = B(eps=0)^{-1} psi_q(x; theta). Scalar-parameter families.
std::vector<CurvePoint> influence_function(const ParametricFamily& fam, const VectorXd& theta,
                                           LqParam q, const std::vector<double>& x_grid,
                                           double quad_tol = 1e-8);

// Level influence function
// LIF(x) = phi(Phi^{-1}(1 - alpha0)) IF(x) / sqrt(int IF^2 dF).
std::vector<CurvePoint> level_influence(const ParametricFamily& fam, const VectorXd& theta,
                                        LqParam q, double alpha0,
                                        const std::vector<double>& x_grid, double quad_tol = 1e-8);

}  // namespace lqlr
