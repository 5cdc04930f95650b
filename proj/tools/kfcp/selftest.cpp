#include <chrono>
#include <cmath>
#include <ostream>
#include <string>

#include "commands.hpp"
#include "kfcp/evalharness.hpp"
#include "oracles.hpp"

namespace kfcp::cli {
namespace {

struct SuiteResult {
  bool passed = false;
  std::string detail;
};

SuiteResult quantile_suite(const QuantileFn& quantile) {
  RngStream rng = derive_stream(2024, {1});
  constexpr int kCases = 1000;
  int mismatches = 0;
  for (int c = 0; c < kCases; ++c) {
    const std::size_t m = 1 + rng.uniform_index(60);
    std::vector<double> residuals(m);
    // Coarse grid so ties are common.
    for (auto& r : residuals) r = static_cast<double>(static_cast<int>(rng.uniform_index(41)) - 20) / 4.0;
    const double level = c % 10 == 0 ? 0.9 : rng.uniform();
    if (quantile(residuals, level) != oracle::brute_force_conformal_quantile(residuals, level)) {
      ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(kCases) + " cases, " + std::to_string(mismatches) + " mismatches"};
}

SuiteResult gradient_suite() {
  RngStream rng = derive_stream(2024, {2});
  constexpr int kNets = 10;
  std::size_t violations = 0;
  std::size_t entries = 0;
  double worst = 0.0;
  for (int net = 0; net < kNets; ++net) {
    MlpConfig cfg;
    cfg.input_dim = 1 + rng.uniform_index(4);
    cfg.hidden_layers.assign(1 + rng.uniform_index(2), 0);
    for (auto& w : cfg.hidden_layers) w = 1 + rng.uniform_index(5);
    cfg.activation = net % 2 == 0 ? Activation::relu : Activation::tanh;
    MlpRegressor model = xavier_init(cfg, rng);
    for (auto& b : model.parameters().biases) {
      for (double& v : b) v = rng.uniform(-0.5, 0.5);
    }
    const std::size_t batch = 1 + rng.uniform_index(8);
    DenseMatrix x(batch, cfg.input_dim);
    std::vector<double> y(batch);
    for (double& v : x.values()) v = rng.std_normal();
    for (double& v : y) v = rng.std_normal();
    const auto check = oracle::check_gradients(model, x, y);
    violations += check.violations;
    entries += check.entries;
    worst = std::max(worst, check.max_relative_error);
  }
  return {violations == 0, std::to_string(entries) + " gradient entries, max rel err " +
                               std::to_string(worst)};
}

SuiteResult oracle_coverage_suite() {
  ScenarioSpec spec;
  spec.n_train = 500;
  spec.n_test = 200;
  spec.replicates = 50;
  const Trainer truth = make_function_trainer(
      [](std::span<const double> x) { return mean_value(MeanFunction::linear, x); });
  HarnessOptions options;
  const auto run = run_scenario(spec, {Method::split(), Method::kfold(5)}, truth, 7, options);
  if (!run.failures.empty()) return {false, run.failures.front().message};
  const auto summaries = aggregate(run.records, false);
  bool ok = true;
  std::string detail;
  for (const auto& s : summaries) {
    ok = ok && std::abs(s.mean_coverage - 0.9) <= 0.02;
    detail += s.method.name() + "=" + std::to_string(s.mean_coverage) + " ";
  }
  return {ok, detail + "(target 0.9 +- 0.02)"};
}

}  // namespace

int cmd_selftest(std::ostream& out, const SelftestHooks& hooks) {
  struct Suite {
    const char* name;
    std::function<SuiteResult()> run;
  };
  const std::vector<Suite> suites{
      {"quantile-oracle", [&] { return quantile_suite(hooks.quantile); }},
      {"gradient-check", gradient_suite},
      {"oracle-coverage", oracle_coverage_suite},
  };
  bool all = true;
  for (const auto& suite : suites) {
    const auto start = std::chrono::steady_clock::now();
    SuiteResult r;
    try {
      r = suite.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << (r.passed ? "[PASS] " : "[FAIL] ") << suite.name << ": " << r.detail << " ("
        << secs << " s)\n";
    all = all && r.passed;
  }
  out << (all ? "selftest passed\n" : "selftest FAILED\n");
  return all ? 0 : 1;
}

}  // namespace kfcp::cli
