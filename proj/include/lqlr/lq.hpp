#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lqlr {

// Tuning parameter of the Lq-likelihood, restricted to (0, 1]. q = 1
// recovers the ordinary log-likelihood; q < 1 bounds the per-point
// contribution below by -1/(1-q).
struct LqParam {
  double value;

  explicit LqParam(double q) : value(q) {
    if (!(q > 0.0 && q <= 1.0))
      throw std::domain_error("LqParam: q must be in (0, 1]");
  }

  bool is_one() const { return value == 1.0; }
};

// Surrogate for log(0) when q = 1; keeps sums finite instead of NaN.
inline constexpr double kLogZeroClamp = -1e300;

// L_q(u) = (u^(1-q) - 1) / (1-q) for q != 1, log u at q = 1. Continuous in q
// (expm1 keeps the q -> 1 limit accurate).
inline double lq_transform(double u, LqParam q) {
  if (!(u > 0.0)) throw std::domain_error("lq_transform: u must be > 0");
  if (q.is_one()) return std::log(u);
  const double a = 1.0 - q.value;
  return std::expm1(a * std::log(u)) / a;
}

// Same transform taking log u, with the density-floor policy: a density that
// underflowed to zero (log u = -inf) contributes the lower bound -1/(1-q)
// for q < 1 and the finite log-zero clamp at q = 1.
inline double lq_transform_from_log(double log_u, LqParam q) {
  if (q.is_one()) {
    if (log_u == -std::numeric_limits<double>::infinity()) return kLogZeroClamp;
    return log_u;
  }
  const double a = 1.0 - q.value;
  if (log_u == -std::numeric_limits<double>::infinity()) return -1.0 / a;
  return std::expm1(a * log_u) / a;
}

// Weight attached to a point with log-density log_u: f^(1-q). Equals 1 for
// every point at q = 1, and decays with the fitted density for q < 1.
inline double lq_weight_from_log(double log_u, LqParam q) {
  if (q.is_one()) return 1.0;
  return std::exp((1.0 - q.value) * log_u);
}

}  // namespace lqlr
