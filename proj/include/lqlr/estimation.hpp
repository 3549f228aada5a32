#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include "lqlr/family.hpp"

namespace lqlr {

struct MlqeOptions {
  VectorXd init;           // empty -> family robust_init
  double theta_tol = 1e-8; // sup-norm of the step
  double score_tol = 1e-8; // sup-norm of S_n
  int max_iter = 500;
  // -1: multistart automatically when q < 0.7; 0/1 force off/on. Extra
  // starts displace the location coordinate by +/- 2 MAD and the best final
  // Lq-likelihood wins.
  int multistart = -1;
  bool record_trace = true;
};

struct EstimationResult {
  VectorXd theta_hat;
  VectorXd weights;        // f(x_i; theta_hat)^(1-q); all ones at q = 1
  double lq_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<bool> constraint_mask;  // empty when unconstrained
  std::vector<double> trace;          // Lq-likelihood per accepted step
  std::string failure;                // set when converged == false
};

// Maximum Lq-likelihood estimate by fixed-point reweighting: given theta,
// weight each point by f(x_i; theta)^(1-q) and solve the weighted likelihood
// equation in closed form. The Lq-likelihood equation is exactly the
// stationarity condition of that weighted problem, so fixed points are MLqE
// stationary points. Steps that would lower the Lq-likelihood are damped
// toward the previous iterate, keeping the recorded trace non-decreasing.
EstimationResult mlqe(const MatrixXd& data, const ParametricFamily& fam, LqParam q,
                      const MlqeOptions& options = {});

// Same, with the listed theta coordinates pinned (the null fit). Fixing every
// coordinate returns the pinned theta with zero iterations.
EstimationResult mlqe_constrained(const MatrixXd& data, const ParametricFamily& fam, LqParam q,
                                  const std::map<int, double>& fixed,
                                  const MlqeOptions& options = {});

}  // namespace lqlr
