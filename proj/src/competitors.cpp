#include "lqlr/competitors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lqlr/estimation.hpp"
#include "lqlr/prob.hpp"
#include "lqlr/rng.hpp"

namespace lqlr {

TestResult t_test(const VectorXd& data, double mu0, Alternative alternative, double alpha) {
  const auto n = data.size();
  if (n < 2) throw std::invalid_argument("t_test: need at least 2 observations");
  const double mean = data.mean();
  const double ss = (data.array() - mean).square().sum();
  if (ss <= 0.0) throw std::runtime_error("t_test: zero sample variance");
  const double s = std::sqrt(ss / static_cast<double>(n - 1));
  const double t = (mean - mu0) / (s / std::sqrt(static_cast<double>(n)));
  const double dof = static_cast<double>(n - 1);

  TestResult r;
  r.method = "lr_t";
  r.n = static_cast<int>(n);
  switch (alternative) {
    case Alternative::Greater:
      r.statistic = t;
      r.p_value = 1.0 - student_t_cdf(t, dof);
      r.critical_value = student_t_quantile(1.0 - alpha, dof);
      break;
    case Alternative::Less:
      r.statistic = -t;
      r.p_value = student_t_cdf(t, dof);
      r.critical_value = student_t_quantile(1.0 - alpha, dof);
      break;
    case Alternative::TwoSided:
      r.statistic = std::fabs(t);
      r.p_value = 2.0 * (1.0 - student_t_cdf(std::fabs(t), dof));
      r.critical_value = student_t_quantile(1.0 - 0.5 * alpha, dof);
      break;
  }
  r.reject = r.p_value <= alpha;
  return r;
}

namespace {

// Average ranks of |d|, with the ranks doubled so ties keep them integral.
std::vector<double> doubled_abs_ranks(const std::vector<double>& absd) {
  const std::size_t n = absd.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return absd[a] < absd[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && absd[order[j + 1]] == absd[order[i]]) ++j;
    const double avg2 = static_cast<double>(i + 1 + j + 1);  // 2 * average rank
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg2;
    i = j + 1;
  }
  return ranks;
}

// Null counts of the doubled rank sum: coefficient c[s] = #{sign patterns
// with doubled W+ = s} out of 2^n.
std::vector<double> signed_rank_counts(const std::vector<double>& doubled_ranks) {
  int total = 0;
  for (double r : doubled_ranks) total += static_cast<int>(std::llround(r));
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  int reach = 0;
  for (double rd : doubled_ranks) {
    const int r = static_cast<int>(std::llround(rd));
    for (int s = reach; s >= 0; --s)
      if (counts[s] != 0.0) counts[s + r] += counts[s];
    reach += r;
  }
  return counts;
}

}  // namespace

double wilcoxon_exact_sf(const std::vector<double>& ranks, double w) {
  std::vector<double> doubled(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) doubled[i] = 2.0 * ranks[i];
  const std::vector<double> counts = signed_rank_counts(doubled);
  const double target = 2.0 * w;
  double above = 0.0, total = 0.0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    total += counts[s];
    if (static_cast<double>(s) >= target - 1e-9) above += counts[s];
  }
  return above / total;
}

TestResult wilcoxon_signed_rank(const VectorXd& data, double mu0, Alternative alternative,
                                double alpha) {
  std::vector<double> d;
  d.reserve(data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double v = data[i] - mu0;
    if (v != 0.0) d.push_back(v);
  }
  const std::size_t n = d.size();
  if (n == 0) throw std::runtime_error("wilcoxon_signed_rank: all differences are zero");

  std::vector<double> absd(n);
  for (std::size_t i = 0; i < n; ++i) absd[i] = std::fabs(d[i]);
  const std::vector<double> ranks2 = doubled_abs_ranks(absd);

  double w2 = 0.0, total2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += ranks2[i];
    if (d[i] > 0.0) w2 += ranks2[i];
  }
  const double w_plus = 0.5 * w2;

  TestResult r;
  r.method = "wilcoxon";
  r.n = static_cast<int>(n);

  double p_greater, p_less;
  if (n <= 25) {
    const std::vector<double> counts = signed_rank_counts(ranks2);
    double below = 0.0, above = 0.0, total = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      total += counts[s];
      if (static_cast<double>(s) >= w2 - 1e-9) above += counts[s];
      if (static_cast<double>(s) <= w2 + 1e-9) below += counts[s];
    }
    p_greater = above / total;
    p_less = below / total;
  } else {
    // Normal approximation, tie-corrected variance, continuity correction.
    const double mu_w = 0.25 * total2;
    const double nn = static_cast<double>(n);
    double tie_adj = 0.0;
    {
      std::vector<double> sorted(absd);
      std::sort(sorted.begin(), sorted.end());
      std::size_t i = 0;
      while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_adj += (t * t * t - t) / 48.0;
        i = j + 1;
      }
    }
    const double var_w = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_adj;
    const double sd_w = std::sqrt(var_w);
    p_greater = 1.0 - normal_cdf((w_plus - mu_w - 0.5) / sd_w);
    p_less = normal_cdf((w_plus - mu_w + 0.5) / sd_w);
  }

  switch (alternative) {
    case Alternative::Greater:
      r.statistic = w_plus;
      r.p_value = p_greater;
      break;
    case Alternative::Less:
      r.statistic = 0.5 * (total2 - w2);  // W-, so rejection is one-tailed upward
      r.p_value = p_less;
      break;
    case Alternative::TwoSided:
      r.statistic = std::fabs(w_plus - 0.25 * total2);
      r.p_value = std::min(1.0, 2.0 * std::min(p_greater, p_less));
      break;
  }
  r.reject = r.p_value <= alpha;
  // Critical value in the reported statistic's scale: smallest value whose
  // attained p is <= alpha (conservative threshold for a discrete law).
  r.critical_value = r.reject ? r.statistic : std::numeric_limits<double>::quiet_NaN();
  return r;
}

TestResult sign_test(const VectorXd& data, double mu0, Alternative alternative, double alpha) {
  int k = 0, n = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double v = data[i] - mu0;
    if (v > 0.0) {
      ++k;
      ++n;
    } else if (v < 0.0) {
      ++n;
    }
  }
  if (n == 0) throw std::runtime_error("sign_test: all differences are zero");

  TestResult r;
  r.method = "sign";
  r.n = n;
  const double p_greater = binomial_half_sf(k, n);
  const double p_less = binomial_half_sf(n - k, n);
  switch (alternative) {
    case Alternative::Greater:
      r.statistic = k;
      r.p_value = p_greater;
      break;
    case Alternative::Less:
      r.statistic = n - k;
      r.p_value = p_less;
      break;
    case Alternative::TwoSided:
      r.statistic = std::max(k, n - k);
      r.p_value = std::min(1.0, 2.0 * std::min(p_greater, p_less));
      break;
  }
  r.reject = r.p_value <= alpha;
  r.critical_value = r.reject ? r.statistic : std::numeric_limits<double>::quiet_NaN();
  return r;
}

double huber_statistic(const VectorXd& data, const std::function<double(double)>& p0,
                       const std::function<double(double)>& p1, double c_low, double c_high) {
  if (!(0.0 < c_low && c_low < c_high))
    throw std::invalid_argument("huber_statistic: need 0 < c_low < c_high");
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double a = p0(data[i]);
    const double b = p1(data[i]);
    double ratio;
    if (a == 0.0 && b == 0.0)
      ratio = 1.0;
    else if (a == 0.0)
      ratio = c_high;
    else
      ratio = b / a;
    total += std::log(std::clamp(ratio, c_low, c_high));
  }
  return total;
}

namespace {

double huber_statistic_mle(const VectorXd& sample, const ParametricFamily& family, double mu0,
                           double log_c_low, double log_c_high) {
  const auto data = as_dataset(sample);
  const LqParam q1{1.0};
  const EstimationResult alt = mlqe(data, family, q1);
  const EstimationResult null = mlqe_constrained(data, family, q1, {{0, mu0}});
  if (!alt.converged || !null.converged)
    throw std::runtime_error("huber_censored_lr: MLE fit failed");
  const VectorXd l1 = family.log_density_all(data, alt.theta_hat);
  const VectorXd l0 = family.log_density_all(data, null.theta_hat);
  double total = 0.0;
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    double log_ratio;
    if (!std::isfinite(l0[i]) && !std::isfinite(l1[i]))
      log_ratio = 0.0;
    else if (!std::isfinite(l0[i]))
      log_ratio = log_c_high;
    else
      log_ratio = l1[i] - l0[i];
    total += std::clamp(log_ratio, log_c_low, log_c_high);
  }
  return total;
}

}  // namespace

TestResult huber_censored_lr(const VectorXd& data, const ParametricFamily& family, double mu0,
                             double c_low, double c_high, int B, std::uint64_t seed,
                             double alpha) {
  if (!(0.0 < c_low && c_low < c_high))
    throw std::invalid_argument("huber_censored_lr: need 0 < c_low < c_high");
  if (family.obs_dim() != 1)
    throw std::invalid_argument("huber_censored_lr: univariate families only");
  const double log_lo = std::log(c_low), log_hi = std::log(c_high);

  const double observed = huber_statistic_mle(data, family, mu0, log_lo, log_hi);

  // Same shift-and-resample calibration as the LqLR bootstrap, centered with
  // the MLE (q = 1).
  const EstimationResult centering = mlqe(as_dataset(data), family, LqParam{1.0});
  if (!centering.converged) throw std::runtime_error("huber_censored_lr: centering fit failed");
  VectorXd shifted = data.array() + (mu0 - centering.theta_hat[0]);

  const auto n = data.size();
  std::vector<double> draws(B);
  VectorXd resample(n);
  for (int b = 0; b < B; ++b) {
    double value = 0.0;
    bool ok = false;
    for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(attempt)}));
      for (Eigen::Index i = 0; i < n; ++i)
        resample[i] = shifted[rng.uniform_index(static_cast<std::uint64_t>(n))];
      try {
        value = huber_statistic_mle(resample, family, mu0, log_lo, log_hi);
        ok = true;
      } catch (const std::runtime_error&) {
      }
    }
    if (!ok) throw std::runtime_error("huber_censored_lr: replicate failed after redraws");
    draws[b] = value;
  }

  TestResult r;
  r.method = "huber";
  r.n = static_cast<int>(n);
  r.statistic = observed;
  int exceed = 0;
  for (double v : draws)
    if (v >= observed) ++exceed;
  r.p_value = (1.0 + exceed) / (B + 1.0);
  std::sort(draws.begin(), draws.end());
  r.critical_value = quantile_type7(draws, 1.0 - alpha);
  r.reject = r.p_value <= alpha;
  BootstrapMeta meta;
  meta.B = B;
  meta.seed = seed;
  meta.theta_hat_q = centering.theta_hat;
  r.bootstrap = meta;
  return r;
}

}  // namespace lqlr
