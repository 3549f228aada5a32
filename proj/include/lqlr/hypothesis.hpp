#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "lqlr/family.hpp"

namespace lqlr {

enum class Alternative { Greater, Less, TwoSided };

inline std::string to_string(Alternative a) {
  switch (a) {
    case Alternative::Greater: return "greater";
    case Alternative::Less: return "less";
    case Alternative::TwoSided: return "two_sided";
  }
  return "two_sided";
}

// Null hypothesis: the first r coordinates of theta equal theta0 (the tested
// block); the remaining coordinates are free nuisance parameters.
struct HypothesisSpec {
  const ParametricFamily* family = nullptr;
  VectorXd theta0;  // values for the tested block; r = theta0.size()
  Alternative alternative = Alternative::TwoSided;
  double alpha = 0.05;

  int tested_block_size() const { return static_cast<int>(theta0.size()); }

  void validate() const {
    if (!family) throw std::invalid_argument("HypothesisSpec: family not set");
    const int r = tested_block_size();
    if (r < 1 || r > family->theta_dim())
      throw std::invalid_argument("HypothesisSpec: tested block size must be in [1, p]");
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("HypothesisSpec: alpha must be in (0, 1)");
    if (alternative != Alternative::TwoSided && r != 1)
      throw std::invalid_argument("HypothesisSpec: one-sided alternatives need a scalar block");
  }
};

struct BootstrapMeta {
  int B = 0;
  std::uint64_t seed = 0;
  VectorXd theta_hat_q;  // centering estimate used for the null shift
  int redraws = 0;
};

struct TestResult {
  double statistic = 0.0;
  double critical_value = 0.0;
  double p_value = 1.0;
  bool reject = false;
  double q_used = 1.0;
  std::string method;
  int n = 0;
  std::optional<BootstrapMeta> bootstrap;
};

}  // namespace lqlr
