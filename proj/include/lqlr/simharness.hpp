#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lqlr/hypothesis.hpp"
#include "lqlr/mixture.hpp"

namespace lqlr {

struct MethodSpec {
  enum class Kind { LqlrFixed, LqlrAdaptive, LrT, Wilcoxon, Sign, Huber };
  Kind kind = Kind::LqlrFixed;
  double q = 1.0;                      // LqlrFixed
  double c_low = 0.1, c_high = 10.0;   // Huber censoring thresholds

  // Stream tag; also the key in result rows. Distinct per configured method
  // so adding a method never perturbs the other methods' random streams.
  std::string tag() const;
  std::string method_name() const;  // lqlr | lr_t | wilcoxon | sign | huber
  std::string q_label() const;      // fixed q, "adaptive", or "" for non-lqlr
};

struct ContaminationSpec {
  enum class Type { SymmetricNormal, FixedNormal, PointMass };
  Type type = Type::SymmetricNormal;
  double mu = 0.0;          // FixedNormal / PointMass center
  double variance = 50.0;   // SymmetricNormal / FixedNormal

  // The realized contamination component; SymmetricNormal tracks the truth
  // location (the paper's phi(x; theta, sigma_g^2)), the others are fixed.
  NormalComponent component(double theta_truth) const;
};

// Monte Carlo study of size and power over a contamination grid.
struct ExperimentSpec {
  std::string family = "normal_location_scale";  // test model; or normal_known_variance
  double sigma = 1.0;                            // ideal-component scale
  double theta_null = 0.0;
  double theta_alt = 0.34;
  ContaminationSpec contamination;
  std::vector<double> eps_grid{0.0};
  int n = 50;
  std::vector<MethodSpec> methods;
  int replicates = 1000;  // M
  double alpha = 0.05;
  Alternative alternative = Alternative::TwoSided;
  std::uint64_t base_seed = 20250811;
  int bootstrap = 400;  // B inside each replicate
  bool collect_qhat = true;
  int threads = 0;  // 0 -> hardware concurrency

  void validate() const;  // throws naming the offending field
  std::shared_ptr<const ParametricFamily> make_family() const;
};

struct CellResult {
  std::string method;
  std::string q_label;
  double eps = 0.0;
  double size = 0.0, size_stderr = 0.0;
  double power = 0.0, power_stderr = 0.0;
  int size_failures = 0, power_failures = 0;
  bool valid = true;  // false when more than 5% of a cell's replicates failed
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<CellResult> cells;  // method-major, eps-minor
  std::map<double, std::vector<double>> qhat_by_eps;  // null-replicate q_hats

  const CellResult& cell(const std::string& method_tag, double eps) const;
  std::string to_csv() const;
  std::string to_json() const;
};

// Rows parsed back from the results CSV (round-trip checks).
struct ResultRow {
  std::string method, q, kind;
  double eps, estimate, stderr_;
  int m;
  std::uint64_t seed;
};
std::vector<ResultRow> parse_results_csv(const std::string& csv);

// Runs every (method, eps) cell: M null replicates give the size, M
// alternative replicates the power. Replicate i of a cell draws its dataset
// from derive(base_seed, "data", kind, eps_index, i) — shared across methods
// so comparisons are paired — and its method-internal randomness from
// derive(base_seed, tag, kind, eps_index, i). Results are identical for any
// thread count.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Per-eps empirical distribution of the adaptively selected q on null data,
// with the 0.5 floor applied by construction of the grid.
std::map<double, std::vector<double>> qhat_histogram(const ExperimentSpec& spec);

}  // namespace lqlr
