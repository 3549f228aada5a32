#include "lqlr/estimation.hpp"

#include <cmath>
#include <stdexcept>

#include "lqlr/prob.hpp"

namespace lqlr {

namespace {

double lq_total_from_log(const VectorXd& logf, LqParam q) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < logf.size(); ++i) total += lq_transform_from_log(logf[i], q);
  return total;
}

VectorXd weights_from_log(const VectorXd& logf, LqParam q) {
  if (q.is_one()) return VectorXd::Ones(logf.size());
  return ((1.0 - q.value) * logf.array()).exp().matrix();
}

struct FitState {
  VectorXd theta;
  VectorXd logf;
  double objective;
};

EstimationResult run_single(const MatrixXd& data, const ParametricFamily& fam, LqParam q,
                            const std::vector<bool>& fixed_mask, const VectorXd& fixed_values,
                            const VectorXd& init, const MlqeOptions& options) {
  EstimationResult res;
  res.constraint_mask = fixed_mask;

  FitState cur{init, fam.log_density_all(data, init), 0.0};
  cur.objective = lq_total_from_log(cur.logf, q);
  if (options.record_trace) res.trace.push_back(cur.objective);

  const bool scale_family = fam.name() == "normal_location_scale";
  bool collapsed = false;

  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    const VectorXd w = weights_from_log(cur.logf, q);
    VectorXd proposal = fam.weighted_mle(data, w, fixed_mask, fixed_values);

    // Damp any step that lowers the Lq-likelihood (can only trigger for
    // q < 1, where the reweighted step is not an exact ascent step).
    VectorXd cand = proposal;
    VectorXd cand_logf = fam.log_density_all(data, cand);
    double cand_obj = lq_total_from_log(cand_logf, q);
    for (int halving = 0; halving < 40 && cand_obj < cur.objective - 1e-12; ++halving) {
      cand = 0.5 * (cand + cur.theta);
      cand_logf = fam.log_density_all(data, cand);
      cand_obj = lq_total_from_log(cand_logf, q);
    }
    if (cand_obj < cur.objective - 1e-12) {
      // No ascent possible along the segment; treat the current point as final.
      break;
    }

    const double step = (cand - cur.theta).cwiseAbs().maxCoeff();
    cur = FitState{cand, std::move(cand_logf), cand_obj};
    if (options.record_trace) res.trace.push_back(cur.objective);

    if (scale_family && !(fixed_mask.size() > 1 && fixed_mask[1])) {
      const auto* ls = static_cast<const NormalLocationScale*>(&fam);
      if (cur.theta[1] <= ls->sigma_floor() * (1.0 + 1e-12)) {
        collapsed = true;
        ++iter;
        break;
      }
    }

    if (step <= options.theta_tol) {
      ++iter;
      break;
    }
    const VectorXd sn = score_sum(fam, data, cur.theta, q);
    bool free_scores_small = true;
    for (int j = 0; j < fam.theta_dim(); ++j) {
      const bool is_fixed = j < static_cast<int>(fixed_mask.size()) && fixed_mask[j];
      if (!is_fixed && std::fabs(sn[j]) > options.score_tol) free_scores_small = false;
    }
    if (free_scores_small) {
      ++iter;
      break;
    }
  }

  res.theta_hat = cur.theta;
  res.weights = weights_from_log(cur.logf, q);
  res.lq_likelihood = cur.objective;
  res.iterations = iter;

  if (collapsed) {
    res.converged = false;
    res.failure = "scale collapse";
    return res;
  }

  const VectorXd sn = score_sum(fam, data, cur.theta, q);
  double free_score_norm = 0.0;
  for (int j = 0; j < fam.theta_dim(); ++j) {
    const bool is_fixed = j < static_cast<int>(fixed_mask.size()) && fixed_mask[j];
    if (!is_fixed) free_score_norm = std::max(free_score_norm, std::fabs(sn[j]));
  }
  // Stationarity in the free coordinates; the tolerance is loose relative to
  // theta_tol because S_n carries the data scale.
  if (iter >= options.max_iter && free_score_norm > std::max(options.score_tol, 1e-6)) {
    res.converged = false;
    res.failure = "no convergence after max_iter";
  } else {
    res.converged = true;
  }
  return res;
}

}  // namespace

EstimationResult mlqe_constrained(const MatrixXd& data, const ParametricFamily& fam, LqParam q,
                                  const std::map<int, double>& fixed,
                                  const MlqeOptions& options) {
  const int p = fam.theta_dim();
  if (data.rows() != fam.obs_dim()) throw std::invalid_argument("mlqe: dataset dimension mismatch");

  std::vector<bool> mask(p, false);
  VectorXd fixed_values = VectorXd::Zero(p);
  for (const auto& [idx, value] : fixed) {
    if (idx < 0 || idx >= p) throw std::invalid_argument("mlqe_constrained: fixed index out of range");
    mask[idx] = true;
    fixed_values[idx] = value;
  }
  const int n_fixed = static_cast<int>(fixed.size());

  if (n_fixed == p) {
    // Nothing to optimize.
    EstimationResult res;
    res.theta_hat = fixed_values;
    const VectorXd logf = fam.log_density_all(data, fixed_values);
    res.weights = q.is_one() ? VectorXd::Ones(data.cols())
                             : VectorXd(((1.0 - q.value) * logf.array()).exp().matrix());
    res.lq_likelihood = lq_likelihood(fam, data, fixed_values, q);
    res.iterations = 0;
    res.converged = true;
    res.constraint_mask = mask;
    if (options.record_trace) res.trace.push_back(res.lq_likelihood);
    return res;
  }

  if (data.cols() < p - n_fixed + 1)
    throw std::invalid_argument("mlqe: need at least dim(free theta) + 1 observations");

  VectorXd init = options.init.size() ? options.init : fam.robust_init(data);
  if (init.size() != p) throw std::invalid_argument("mlqe: init dimension mismatch");
  for (int j = 0; j < p; ++j)
    if (mask[j]) init[j] = fixed_values[j];

  const bool multistart =
      options.multistart == 1 || (options.multistart < 0 && q.value < 0.7);

  EstimationResult best =
      run_single(data, fam, q, mask, fixed_values, init, options);
  if (multistart) {
    // Robust spread of the first location coordinate; +/- 2 MAD starts guard
    // against settling in a contaminated basin.
    int loc = -1;
    for (int j = 0; j < p && loc < 0; ++j)
      if (!mask[j] && fam.location_coordinate(j) >= 0) loc = j;
    if (loc >= 0) {
      const int obs_coord = fam.location_coordinate(loc);
      std::vector<double> v(data.row(obs_coord).begin(), data.row(obs_coord).end());
      const double med = median_of(v);
      for (double& u : v) u = std::fabs(u - med);
      const double spread = std::max(1.4826 * median_of(std::move(v)), 1e-12);
      for (double shift : {2.0 * spread, -2.0 * spread}) {
        VectorXd alt = init;
        alt[loc] += shift;
        EstimationResult r = run_single(data, fam, q, mask, fixed_values, alt, options);
        if (r.converged && (!best.converged || r.lq_likelihood > best.lq_likelihood)) best = std::move(r);
      }
    }
  }
  return best;
}

EstimationResult mlqe(const MatrixXd& data, const ParametricFamily& fam, LqParam q,
                      const MlqeOptions& options) {
  return mlqe_constrained(data, fam, q, {}, options);
}

}  // namespace lqlr
