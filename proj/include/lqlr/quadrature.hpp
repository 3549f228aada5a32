#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace lqlr {

// Adaptive Simpson for vector-valued integrands, refining until the
// elementwise error estimate meets the absolute tolerance. Breakpoints let
// callers pre-split the domain at the scales of mixture components so the
// recursion starts from intervals the rule can resolve.
class VectorQuadrature {
 public:
  using Integrand = std::function<Eigen::VectorXd(double)>;

  static Eigen::VectorXd integrate(const Integrand& f, double a, double b, double abs_tol,
                                   const std::vector<double>& breakpoints = {},
                                   int max_depth = 48) {
    if (!(a < b)) throw std::invalid_argument("VectorQuadrature: need a < b");
    std::vector<double> knots{a};
    for (double t : breakpoints)
      if (t > a && t < b) knots.push_back(t);
    knots.push_back(b);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

    Eigen::VectorXd total;
    const double seg_tol = abs_tol / static_cast<double>(knots.size() - 1);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      const double lo = knots[i], hi = knots[i + 1];
      const Eigen::VectorXd flo = f(lo), fmid = f(0.5 * (lo + hi)), fhi = f(hi);
      const Eigen::VectorXd whole = simpson(flo, fmid, fhi, hi - lo);
      Eigen::VectorXd part =
          recurse(f, lo, hi, flo, fmid, fhi, whole, seg_tol, max_depth);
      if (total.size() == 0)
        total = std::move(part);
      else
        total += part;
    }
    return total;
  }

 private:
  static Eigen::VectorXd simpson(const Eigen::VectorXd& fa, const Eigen::VectorXd& fm,
                                 const Eigen::VectorXd& fb, double h) {
    return (h / 6.0) * (fa + 4.0 * fm + fb);
  }

  static Eigen::VectorXd recurse(const Integrand& f, double a, double b,
                                 const Eigen::VectorXd& fa, const Eigen::VectorXd& fm,
                                 const Eigen::VectorXd& fb, const Eigen::VectorXd& whole,
                                 double tol, int depth) {
    const double m = 0.5 * (a + b);
    const Eigen::VectorXd fl = f(0.5 * (a + m));
    const Eigen::VectorXd fr = f(0.5 * (m + b));
    const Eigen::VectorXd left = simpson(fa, fl, fm, m - a);
    const Eigen::VectorXd right = simpson(fm, fr, fb, b - m);
    const Eigen::VectorXd err = left + right - whole;
    if (depth <= 0 || err.cwiseAbs().maxCoeff() <= 15.0 * tol)
      return left + right + err / 15.0;
    return recurse(f, a, m, fa, fl, fm, left, 0.5 * tol, depth - 1) +
           recurse(f, m, b, fm, fr, fb, right, 0.5 * tol, depth - 1);
  }
};

inline double scalar_quadrature(const std::function<double(double)>& f, double a, double b,
                                double abs_tol, const std::vector<double>& breakpoints = {}) {
  auto wrapped = [&f](double x) {
    Eigen::VectorXd v(1);
    v[0] = f(x);
    return v;
  };
  return VectorQuadrature::integrate(wrapped, a, b, abs_tol, breakpoints)[0];
}

}  // namespace lqlr
