#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "kfcp/conformal.hpp"
#include "kfcp/dataset.hpp"
#include "kfcp/mlp.hpp"
#include "kfcp/regressor.hpp"
#include "kfcp/simgen.hpp"
#include "kfcp/stats.hpp"

namespace kfcp {

/// Coverage and mean width of one method on one replicate (simulation) or
/// one repeat of outer cross validation (real data).
struct EvalRecord {
  Method method;
  std::string scenario;
  std::size_t replicate = 0;
  double coverage = 0.0;
  double mean_width = 0.0;
  double runtime_seconds = 0.0;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

/// A (scenario, replicate, method) cell that could not be fitted.
struct CellFailure {
  std::string scenario;
  std::size_t replicate = 0;
  Method method;
  std::string message;
};

struct HarnessOptions {
  ConformalOptions conformal;
  /// Worker threads; results do not depend on this value.
  std::size_t workers = 1;
  /// Measure wall time per cell. Off keeps runtime_seconds at 0 so that
  /// record tables are byte-reproducible.
  bool record_runtime = false;
};

struct IntervalScore {
  std::size_t covered = 0;
  std::size_t count = 0;
  double width_sum = 0.0;

  [[nodiscard]] double coverage() const noexcept {
    return count == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(count);
  }
  [[nodiscard]] double mean_width() const noexcept {
    return count == 0 ? 0.0 : width_sum / static_cast<double>(count);
  }
};

/// Counts test responses inside their intervals and sums widths.
IntervalScore score_intervals(const ConformalModel& model, const Dataset& test);

/// Thread-safe memo of E|m(X)| per (seed, mean function, p, rho).
class AbsMeanCache {
 public:
  explicit AbsMeanCache(std::size_t mc_samples = 1'000'000) : mc_samples_(mc_samples) {}
  double get(std::uint64_t master_seed, MeanFunction f, std::size_t p, double rho);

 private:
  std::size_t mc_samples_;
  std::mutex mutex_;
  std::map<std::tuple<std::uint64_t, int, std::size_t, double>, double> values_;
};

struct ScenarioRun {
  std::vector<EvalRecord> records;
  std::vector<CellFailure> failures;
};

/// Simulation protocol: for each replicate draw (train, test) once, fit every
/// method on the same training set and score it on the same test set.
/// Records come back ordered by (replicate, method list order).
ScenarioRun run_scenario(const ScenarioSpec& spec, const std::vector<Method>& methods,
                         const Trainer& trainer, std::uint64_t master_seed,
                         const HarnessOptions& options, AbsMeanCache* cache = nullptr);

ScenarioRun run_scenario(const ScenarioSpec& spec, const std::vector<Method>& methods,
                         const MlpConfig& nn_config, std::uint64_t master_seed,
                         const HarnessOptions& options, AbsMeanCache* cache = nullptr);

/// z-score transform fitted on training rows; constant columns get scale 1.
class Standardizer {
 public:
  static Standardizer fit(const DenseMatrix& x);
  [[nodiscard]] DenseMatrix apply(const DenseMatrix& x) const;

  [[nodiscard]] const std::vector<double>& means() const noexcept { return means_; }
  [[nodiscard]] const std::vector<double>& scales() const noexcept { return scales_; }

 private:
  std::vector<double> means_;
  std::vector<double> scales_;
};

struct RealDataRun {
  std::vector<EvalRecord> records;
  std::vector<CellFailure> failures;
  /// partitions[repeat][fold] lists the outer-test row indices.
  std::vector<std::vector<std::vector<std::size_t>>> partitions;
};

/// Repeated outer k-fold cross validation on one dataset. Predictors are
/// standardized with outer-training statistics only. One record per
/// (method, repeat) pooling the repeat's held-out rows.
RealDataRun run_real_dataset(const Dataset& data, const std::string& name,
                             const std::vector<Method>& methods, const Trainer& trainer,
                             std::size_t outer_folds, std::size_t repeats,
                             std::uint64_t master_seed, const HarnessOptions& options);

struct AggregateSummary {
  Method method;
  std::string scenario;
  std::size_t replicates = 0;
  double mean_coverage = 0.0;
  Quartiles coverage_quartiles;
  double mean_width = 0.0;
  /// Mean of per-replicate log2(width_SC / width_method); empty when ratios
  /// were not requested.
  std::optional<double> mean_log2_ratio;
};

struct PairedRatio {
  std::string scenario;
  std::size_t replicate = 0;
  Method method;
  double log2_ratio = 0.0;
};

/// log2(width_SC / width_method) for every record, paired with the SC record
/// of the same (scenario, replicate). SC records pair with themselves (0).
/// Throws MissingBaseline when a pair has no SC record.
std::vector<PairedRatio> paired_log2_ratios(const std::vector<EvalRecord>& records);

/// Per (scenario, method) summaries sorted by scenario then method.
/// Throws MissingBaseline if with_ratios and SC records are missing.
std::vector<AggregateSummary> aggregate(const std::vector<EvalRecord>& records, bool with_ratios);

/// Runs fn(i) for i in [0, count) on up to `workers` threads.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace kfcp
