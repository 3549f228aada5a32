#include "lqlr/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "lqlr/competitors.hpp"
#include "lqlr/lqlr_test.hpp"
#include "lqlr/prob.hpp"
#include "lqlr/rng.hpp"

namespace lqlr {

using nlohmann::json;

std::string MethodSpec::tag() const {
  char buf[64];
  switch (kind) {
    case Kind::LqlrFixed:
      std::snprintf(buf, sizeof(buf), "lqlr[q=%.2f]", q);
      return buf;
    case Kind::LqlrAdaptive:
      return "lqlr[adaptive]";
    case Kind::LrT:
      return "lr_t";
    case Kind::Wilcoxon:
      return "wilcoxon";
    case Kind::Sign:
      return "sign";
    case Kind::Huber:
      std::snprintf(buf, sizeof(buf), "huber[%.3g,%.3g]", c_low, c_high);
      return buf;
  }
  return "?";
}

std::string MethodSpec::method_name() const {
  switch (kind) {
    case Kind::LqlrFixed:
    case Kind::LqlrAdaptive:
      return "lqlr";
    case Kind::LrT:
      return "lr_t";
    case Kind::Wilcoxon:
      return "wilcoxon";
    case Kind::Sign:
      return "sign";
    case Kind::Huber:
      return "huber";
  }
  return "?";
}

std::string MethodSpec::q_label() const {
  if (kind == Kind::LqlrAdaptive) return "adaptive";
  if (kind != Kind::LqlrFixed) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", q);
  return buf;
}

NormalComponent ContaminationSpec::component(double theta_truth) const {
  switch (type) {
    case Type::SymmetricNormal:
      return NormalComponent::univariate(theta_truth, variance);
    case Type::FixedNormal:
      return NormalComponent::univariate(mu, variance);
    case Type::PointMass:
      // Near-point-mass surrogate: a normal with variance 1e-4 (sigma 0.01).
      return NormalComponent::univariate(mu, 1e-4);
  }
  throw std::logic_error("ContaminationSpec: unknown type");
}

void ExperimentSpec::validate() const {
  if (family != "normal_location_scale" && family != "normal_known_variance")
    throw std::invalid_argument("ExperimentSpec.family: unknown family '" + family + "'");
  if (!(sigma > 0.0)) throw std::invalid_argument("ExperimentSpec.sigma: must be > 0");
  if (eps_grid.empty()) throw std::invalid_argument("ExperimentSpec.eps_grid: empty");
  for (double e : eps_grid)
    if (!(e >= 0.0 && e <= 0.5))
      throw std::invalid_argument("ExperimentSpec.eps_grid: entries must lie in [0, 0.5]");
  if (n < 3) throw std::invalid_argument("ExperimentSpec.n: too small");
  if (methods.empty()) throw std::invalid_argument("ExperimentSpec.methods: empty");
  if (replicates < 100) throw std::invalid_argument("ExperimentSpec.replicates: must be >= 100");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("ExperimentSpec.alpha: must be in (0, 1)");
  if (theta_alt == theta_null)
    throw std::invalid_argument("ExperimentSpec.theta_alt: must differ from theta_null");
  if (bootstrap < 100) throw std::invalid_argument("ExperimentSpec.bootstrap: must be >= 100");
  if (contamination.type != ContaminationSpec::Type::PointMass &&
      !(contamination.variance > 0.0))
    throw std::invalid_argument("ExperimentSpec.contamination.variance: must be > 0");
}

std::shared_ptr<const ParametricFamily> ExperimentSpec::make_family() const {
  if (family == "normal_known_variance")
    return std::make_shared<NormalKnownVariance>(sigma);
  return std::make_shared<NormalLocationScale>();
}

namespace {

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (int i = t; i < count; i += threads) body(i);
    });
  for (auto& th : pool) th.join();
}

struct ReplicateOutcome {
  std::uint8_t reject = 0;
  std::uint8_t failed = 0;
  double q_used = std::numeric_limits<double>::quiet_NaN();
};

ReplicateOutcome run_replicate(const ExperimentSpec& spec, const ParametricFamily& test_family,
                               const MethodSpec& method, bool alternative_truth, int eps_index,
                               int rep) {
  const double eps = spec.eps_grid[eps_index];
  const double truth = alternative_truth ? spec.theta_alt : spec.theta_null;
  const std::uint64_t kind_ix = alternative_truth ? 1 : 0;

  // Dataset stream is shared by every method (paired comparisons); the
  // method stream feeds bootstrap internals only.
  const std::uint64_t data_seed = derive_seed(
      spec.base_seed, {fnv1a64("data"), kind_ix, static_cast<std::uint64_t>(eps_index),
                       static_cast<std::uint64_t>(rep)});
  const std::uint64_t method_seed = derive_seed(
      spec.base_seed, {fnv1a64(method.tag()), kind_ix, static_cast<std::uint64_t>(eps_index),
                       static_cast<std::uint64_t>(rep)});

  NormalLocationScale truth_family;
  VectorXd theta_truth(2);
  theta_truth[0] = truth;
  theta_truth[1] = spec.sigma;
  const GrossErrorModel model(truth_family, theta_truth,
                              spec.contamination.component(truth), eps);
  const MatrixXd data = model.sample(spec.n, data_seed);
  const VectorXd sample = data.row(0).transpose();

  ReplicateOutcome out;
  try {
    TestResult result;
    switch (method.kind) {
      case MethodSpec::Kind::LqlrFixed:
      case MethodSpec::Kind::LqlrAdaptive: {
        HypothesisSpec hyp;
        hyp.family = &test_family;
        hyp.theta0 = VectorXd::Constant(1, spec.theta_null);
        hyp.alternative = spec.alternative;
        hyp.alpha = spec.alpha;
        LqlrOptions options;
        if (method.kind == MethodSpec::Kind::LqlrFixed) options.q = method.q;
        options.B = spec.bootstrap;
        options.seed = method_seed;
        result = lqlr_test(data, hyp, options);
        out.q_used = result.q_used;
        break;
      }
      case MethodSpec::Kind::LrT:
        result = t_test(sample, spec.theta_null, spec.alternative, spec.alpha);
        break;
      case MethodSpec::Kind::Wilcoxon:
        result = wilcoxon_signed_rank(sample, spec.theta_null, spec.alternative, spec.alpha);
        break;
      case MethodSpec::Kind::Sign:
        result = sign_test(sample, spec.theta_null, spec.alternative, spec.alpha);
        break;
      case MethodSpec::Kind::Huber:
        result = huber_censored_lr(sample, test_family, spec.theta_null, method.c_low,
                                   method.c_high, spec.bootstrap, method_seed, spec.alpha);
        break;
    }
    out.reject = result.reject ? 1 : 0;
  } catch (const std::exception&) {
    out.failed = 1;
  }
  return out;
}

}  // namespace

const CellResult& ExperimentResult::cell(const std::string& method_tag, double eps) const {
  for (std::size_t m = 0; m < spec.methods.size(); ++m) {
    if (spec.methods[m].tag() != method_tag) continue;
    for (std::size_t e = 0; e < spec.eps_grid.size(); ++e)
      if (spec.eps_grid[e] == eps) return cells[m * spec.eps_grid.size() + e];
  }
  throw std::out_of_range("ExperimentResult::cell: no cell " + method_tag);
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto test_family = spec.make_family();

  ExperimentResult result;
  result.spec = spec;
  const int n_eps = static_cast<int>(spec.eps_grid.size());
  const int M = spec.replicates;
  result.cells.resize(spec.methods.size() * n_eps);

  for (std::size_t m = 0; m < spec.methods.size(); ++m) {
    const MethodSpec& method = spec.methods[m];
    const bool adaptive = method.kind == MethodSpec::Kind::LqlrAdaptive;
    for (int e = 0; e < n_eps; ++e) {
      CellResult& cell = result.cells[m * n_eps + e];
      cell.method = method.method_name();
      cell.q_label = method.q_label();
      cell.eps = spec.eps_grid[e];

      std::vector<double>* qhats = nullptr;
      if (adaptive && spec.collect_qhat) {
        auto& v = result.qhat_by_eps[spec.eps_grid[e]];
        v.assign(M, std::numeric_limits<double>::quiet_NaN());
        qhats = &v;
      }

      for (const bool alt_truth : {false, true}) {
        std::vector<ReplicateOutcome> outcomes(M);
        parallel_for(M, spec.threads, [&](int rep) {
          outcomes[rep] = run_replicate(spec, *test_family, method, alt_truth, e, rep);
        });
        int rejects = 0, failures = 0;
        for (int rep = 0; rep < M; ++rep) {
          if (outcomes[rep].failed) {
            ++failures;
            continue;
          }
          rejects += outcomes[rep].reject;
          if (!alt_truth && qhats) (*qhats)[rep] = outcomes[rep].q_used;
        }
        const int ok = M - failures;
        const double rate = ok > 0 ? static_cast<double>(rejects) / ok : 0.0;
        const double se = ok > 0 ? std::sqrt(rate * (1.0 - rate) / ok) : 0.0;
        if (!alt_truth) {
          cell.size = rate;
          cell.size_stderr = se;
          cell.size_failures = failures;
        } else {
          cell.power = rate;
          cell.power_stderr = se;
          cell.power_failures = failures;
        }
        if (failures * 20 > M) cell.valid = false;  // > 5% of a cell failed
      }
      if (qhats)
        qhats->erase(std::remove_if(qhats->begin(), qhats->end(),
                                    [](double v) { return std::isnan(v); }),
                     qhats->end());
    }
  }
  return result;
}

std::map<double, std::vector<double>> qhat_histogram(const ExperimentSpec& spec) {
  spec.validate();
  bool has_adaptive = false;
  for (const auto& m : spec.methods)
    if (m.kind == MethodSpec::Kind::LqlrAdaptive) has_adaptive = true;
  if (!has_adaptive)
    throw std::invalid_argument("qhat_histogram: spec has no adaptive method");

  const auto test_family = spec.make_family();
  HypothesisSpec hyp;
  hyp.family = test_family.get();
  hyp.theta0 = VectorXd::Constant(1, spec.theta_null);
  hyp.alternative = spec.alternative;
  hyp.alpha = spec.alpha;
  const std::vector<double> grid = default_q_grid();

  std::map<double, std::vector<double>> out;
  const int M = spec.replicates;
  for (std::size_t e = 0; e < spec.eps_grid.size(); ++e) {
    const double eps = spec.eps_grid[e];
    std::vector<double> qhats(M, std::numeric_limits<double>::quiet_NaN());
    parallel_for(M, spec.threads, [&](int rep) {
      const std::uint64_t data_seed =
          derive_seed(spec.base_seed, {fnv1a64("qhat"), static_cast<std::uint64_t>(e),
                                       static_cast<std::uint64_t>(rep)});
      NormalLocationScale truth_family;
      VectorXd theta_truth(2);
      theta_truth[0] = spec.theta_null;
      theta_truth[1] = spec.sigma;
      const GrossErrorModel model(truth_family, theta_truth,
                                  spec.contamination.component(spec.theta_null), eps);
      const MatrixXd data = model.sample(spec.n, data_seed);
      try {
        qhats[rep] = select_q(data, hyp, grid).q_hat;
      } catch (const std::exception&) {
      }
    });
    qhats.erase(
        std::remove_if(qhats.begin(), qhats.end(), [](double v) { return std::isnan(v); }),
        qhats.end());
    out[eps] = std::move(qhats);
  }
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::string ExperimentResult::to_csv() const {
  std::ostringstream os;
  os << "method,q,eps,kind,estimate,stderr,M,seed\n";
  for (const auto& c : cells) {
    os << c.method << ',' << c.q_label << ',' << format_double(c.eps) << ",size,"
       << format_double(c.size) << ',' << format_double(c.size_stderr) << ',' << spec.replicates
       << ',' << spec.base_seed << '\n';
    os << c.method << ',' << c.q_label << ',' << format_double(c.eps) << ",power,"
       << format_double(c.power) << ',' << format_double(c.power_stderr) << ',' << spec.replicates
       << ',' << spec.base_seed << '\n';
  }
  return os.str();
}

std::vector<ResultRow> parse_results_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  if (!std::getline(is, line) || line != "method,q,eps,kind,estimate,stderr,M,seed")
    throw std::runtime_error("parse_results_csv: bad header");
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ResultRow row;
    std::string field;
    std::getline(ls, row.method, ',');
    std::getline(ls, row.q, ',');
    std::getline(ls, field, ',');
    row.eps = std::stod(field);
    std::getline(ls, row.kind, ',');
    std::getline(ls, field, ',');
    row.estimate = std::stod(field);
    std::getline(ls, field, ',');
    row.stderr_ = std::stod(field);
    std::getline(ls, field, ',');
    row.m = std::stoi(field);
    std::getline(ls, field, ',');
    row.seed = std::stoull(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

json spec_to_json(const ExperimentSpec& spec) {
  json j;
  j["family"] = spec.family;
  j["sigma"] = spec.sigma;
  j["theta_null"] = spec.theta_null;
  j["theta_alt"] = spec.theta_alt;
  switch (spec.contamination.type) {
    case ContaminationSpec::Type::SymmetricNormal:
      j["contamination"] = {{"type", "normal"}, {"sigma2", spec.contamination.variance}};
      break;
    case ContaminationSpec::Type::FixedNormal:
      j["contamination"] = {{"type", "normal"},
                            {"mu", spec.contamination.mu},
                            {"sigma2", spec.contamination.variance}};
      break;
    case ContaminationSpec::Type::PointMass:
      j["contamination"] = {{"type", "point_mass"}, {"location", spec.contamination.mu}};
      break;
  }
  j["eps_grid"] = spec.eps_grid;
  j["n"] = spec.n;
  json methods = json::array();
  for (const auto& m : spec.methods) {
    json jm;
    jm["method"] = m.method_name();
    if (m.kind == MethodSpec::Kind::LqlrFixed) jm["q"] = m.q;
    if (m.kind == MethodSpec::Kind::LqlrAdaptive) jm["q"] = "adaptive";
    if (m.kind == MethodSpec::Kind::Huber) {
      jm["c_low"] = m.c_low;
      jm["c_high"] = m.c_high;
    }
    methods.push_back(jm);
  }
  j["methods"] = methods;
  j["replicates"] = spec.replicates;
  j["alpha"] = spec.alpha;
  j["alternative"] = to_string(spec.alternative);
  j["seed"] = spec.base_seed;
  j["bootstrap"] = spec.bootstrap;
  return j;
}

}  // namespace

std::string ExperimentResult::to_json() const {
  json j;
  j["spec"] = spec_to_json(spec);
  json rows = json::array();
  for (const auto& c : cells) {
    for (const char* kind : {"size", "power"}) {
      json row;
      row["method"] = c.method;
      row["q"] = c.q_label;
      row["eps"] = c.eps;
      row["kind"] = kind;
      row["estimate"] = std::string(kind) == "size" ? c.size : c.power;
      row["stderr"] = std::string(kind) == "size" ? c.size_stderr : c.power_stderr;
      row["M"] = spec.replicates;
      row["seed"] = spec.base_seed;
      row["failures"] = std::string(kind) == "size" ? c.size_failures : c.power_failures;
      row["valid"] = c.valid;
      rows.push_back(row);
    }
  }
  j["results"] = rows;
  if (!qhat_by_eps.empty()) {
    json q;
    for (const auto& [eps, values] : qhat_by_eps) q[format_double(eps)] = values;
    j["qhat"] = q;
  }
  return j.dump(2);
}

}  // namespace lqlr
