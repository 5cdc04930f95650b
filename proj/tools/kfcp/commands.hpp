#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kfcp/conformal.hpp"
#include "kfcp/mlp.hpp"
#include "kfcp/simgen.hpp"

namespace kfcp::cli {

/// Settings shared by `simulate` and `analyze`.
struct CommonConfig {
  std::uint64_t seed = 42;
  std::size_t workers = 1;
  std::filesystem::path out_dir = "results";
  std::vector<Method> methods;
  ConformalOptions conformal;
  bool record_runtime = false;
  /// --ratios: demand SC baselines (MissingBaseline otherwise). Without it,
  /// ratios are reported whenever SC is among the methods.
  bool require_ratios = false;
  MlpConfig nn;
};

struct SimulateConfig {
  CommonConfig common;
  std::vector<ScenarioSpec> scenarios;
  std::size_t replicates = 50;
  std::size_t n_test = 500;
  bool het_as_sd = false;

  /// Factorial grid, SC/k2/k5/k10, 50 replicates, 2x15 network.
  static SimulateConfig paper_defaults();
  /// Throws Error(ConfigError) naming the offending field.
  void validate() const;
};

struct AnalyzeConfig {
  CommonConfig common;
  std::filesystem::path manifest;
  std::size_t outer_folds = 5;
  std::size_t repeats = 20;

  /// 5-fold CV repeated 20 times, SC and k5, 2x10 network.
  static AnalyzeConfig paper_defaults();
  void validate() const;
};

/// Runs the scenario grid and writes records.csv, summary.txt,
/// coverage_<scenario>.svg, ratio_<scenario>.svg and meta.json into
/// out_dir. Returns 0 on success, 1 if any cell failed (partial results
/// are still written), 2 on configuration errors.
int cmd_simulate(const SimulateConfig& config, std::ostream& log);

/// Repeated outer cross validation for every manifest dataset. Besides the
/// simulate bundle it writes folds_<dataset>.csv (row, then the held-out
/// fold of that row in each repeat). A dataset that fails to load is
/// reported and skipped. Exit codes as cmd_simulate.
int cmd_analyze(const AnalyzeConfig& config, std::ostream& log);

using QuantileFn = std::function<double(std::span<const double>, double)>;

struct SelftestHooks {
  /// Implementation checked by the quantile oracle suite.
  QuantileFn quantile = [](std::span<const double> r, double level) {
    return conformal_quantile(r, level);
  };
};

/// Fast oracle suites; prints one PASS/FAIL line each, returns 0 iff all pass.
int cmd_selftest(std::ostream& out, const SelftestHooks& hooks = {});

struct Invocation {
  enum class Command { none, simulate, analyze, selftest };
  Command command = Command::none;
  SimulateConfig simulate;
  AnalyzeConfig analyze;
};

/// Parses argv-style arguments (without the program name), applying
/// built-in defaults, then --config JSON, then flags. Throws
/// Error(ConfigError) on invalid input.
Invocation parse_command_line(const std::vector<std::string>& args);

/// Entry point used by main().
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kfcp::cli
