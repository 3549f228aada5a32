#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

#include "lqlr/hypothesis.hpp"

namespace lqlr {

// One-sample Student t test against mu0.
TestResult t_test(const VectorXd& data, double mu0, Alternative alternative, double alpha = 0.05);

// One-sample Wilcoxon signed-rank test. Zeros (x_i == mu0) are dropped, ties
// get average ranks. Exact null distribution (dynamic programming over rank
// sums) when the nonzero count is <= 25, normal approximation with
// continuity correction and tie-adjusted variance above.
TestResult wilcoxon_signed_rank(const VectorXd& data, double mu0, Alternative alternative,
                                double alpha = 0.05);

// Exact null distribution of W+ over the 2^n sign assignments for the given
// absolute ranks (doubled to keep them integral under average ranks).
// Returns P(W+ >= w) exactly. Exposed for the enumeration cross-checks.
double wilcoxon_exact_sf(const std::vector<double>& ranks, double w);

// One-sample sign test: exact binomial(n', 1/2) on the positive count after
// dropping zeros.
TestResult sign_test(const VectorXd& data, double mu0, Alternative alternative,
                     double alpha = 0.05);

// Huber censored likelihood-ratio statistic
//   T = sum_i log clamp(p1(x_i) / p0(x_i), c_low, c_high).
// Points where both densities vanish contribute log clamp(1) = 0; p0 = 0
// with p1 > 0 clamps to c_high.
double huber_statistic(const VectorXd& data, const std::function<double(double)>& p0,
                       const std::function<double(double)>& p1, double c_low, double c_high);

// Huber test calibrated like the LqLR bootstrap: p1 is the family density at
// the unconstrained MLE (q = 1), p0 at the null-constrained MLE; the
// critical value comes from the same shift-and-resample scheme centered with
// the MLE. Defaults c_low = 0.1, c_high = 10.
TestResult huber_censored_lr(const VectorXd& data, const ParametricFamily& family, double mu0,
                             double c_low, double c_high, int B, std::uint64_t seed,
                             double alpha = 0.05);

}  // namespace lqlr
