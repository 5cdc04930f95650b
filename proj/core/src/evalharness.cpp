#include "kfcp/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include "kfcp/error.hpp"

namespace kfcp {
namespace {

constexpr std::uint64_t kSimulationTag = 0x51D'0000'0001ULL;
constexpr std::uint64_t kRealDataTag = 0x8EA'0000'0001ULL;
constexpr std::uint64_t kMethodTag = 0x3E7'0000'0001ULL;
constexpr std::uint64_t kRetryTag = 0x8E7'0000'0001ULL;

std::uint64_t method_code(Method m) noexcept {
  return m.kind == Method::Kind::split ? 0 : static_cast<std::uint64_t>(m.k);
}

RngStream method_stream(const RngStream& unit, Method m) {
  return unit.child(kMethodTag).child(method_code(m));
}

using Clock = std::chrono::steady_clock;

struct CellOutcome {
  IntervalScore score;
  double seconds = 0.0;
  std::optional<std::string> error;
};

// Fits and scores one method. NonFiniteLoss earns one retry on a fresh
// stream; any other failure or a second divergence is reported.
CellOutcome fit_and_score(Method method, const Dataset& train, const Dataset& test,
                          const Trainer& trainer, const RngStream& stream,
                          const HarnessOptions& options) {
  CellOutcome out;
  const auto start = Clock::now();
  for (int attempt = 0; attempt < 2; ++attempt) {
    const RngStream s = attempt == 0 ? stream : stream.child(kRetryTag);
    try {
      const ConformalModel model = fit_conformal(method, train, trainer, options.conformal, s);
      out.score = score_intervals(model, test);
      out.error.reset();
      break;
    } catch (const Error& e) {
      out.error = e.what();
      if (e.code() != ErrorCode::NonFiniteLoss) break;
    } catch (const std::exception& e) {
      out.error = e.what();
      break;
    }
  }
  if (options.record_runtime) {
    out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  }
  return out;
}

void require_methods(const std::vector<Method>& methods) {
  if (methods.empty()) throw Error(ErrorCode::InvalidArgument, "at least one method is required");
}

}  // namespace

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (first_error) std::rethrow_exception(first_error);
}

IntervalScore score_intervals(const ConformalModel& model, const Dataset& test) {
  IntervalScore score;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const PredictionInterval pi = predict_interval(model, test.x.row(i));
    if (pi.contains(test.y[i])) ++score.covered;
    score.width_sum += pi.width();
    ++score.count;
  }
  return score;
}

double AbsMeanCache::get(std::uint64_t master_seed, MeanFunction f, std::size_t p, double rho) {
  const auto key = std::make_tuple(master_seed, static_cast<int>(f), p, rho);
  std::lock_guard lock(mutex_);
  if (auto it = values_.find(key); it != values_.end()) return it->second;
  RngStream stream = abs_mean_stream(master_seed, f, p, rho);
  const double value = estimate_abs_mean(f, p, rho, stream, mc_samples_);
  values_.emplace(key, value);
  return value;
}

ScenarioRun run_scenario(const ScenarioSpec& spec, const std::vector<Method>& methods,
                         const Trainer& trainer, std::uint64_t master_seed,
                         const HarnessOptions& options, AbsMeanCache* cache) {
  require_methods(methods);
  spec.validate();
  options.conformal.validate();

  double abs_mean = 1.0;
  if (spec.error_dist == ErrorDistribution::heteroscedastic) {
    AbsMeanCache local;
    abs_mean = (cache ? *cache : local).get(master_seed, spec.mean_fn, spec.p, spec.rho);
  }
  const ScenarioGenerator generator(spec, abs_mean);
  const std::string id = spec.id();

  struct ReplicateResult {
    std::vector<CellOutcome> cells;
  };
  std::vector<ReplicateResult> results(spec.replicates);

  parallel_for(spec.replicates, options.workers, [&](std::size_t rep) {
    const RngStream unit = derive_stream(
        master_seed, {kSimulationTag, static_cast<std::uint64_t>(spec.mean_fn),
                      static_cast<std::uint64_t>(spec.error_dist), spec.n_train, spec.p,
                      std::bit_cast<std::uint64_t>(spec.rho), spec.n_test,
                      static_cast<std::uint64_t>(spec.het_reading), rep});
    const SimulatedData data = generator.generate(unit);
    auto& cells = results[rep].cells;
    cells.reserve(methods.size());
    for (Method m : methods) {
      cells.push_back(fit_and_score(m, data.train, data.test, trainer, method_stream(unit, m), options));
    }
  });

  ScenarioRun run;
  for (std::size_t rep = 0; rep < spec.replicates; ++rep) {
    for (std::size_t j = 0; j < methods.size(); ++j) {
      const CellOutcome& c = results[rep].cells[j];
      if (c.error) {
        run.failures.push_back({id, rep, methods[j], *c.error});
      } else {
        run.records.push_back(
            {methods[j], id, rep, c.score.coverage(), c.score.mean_width(), c.seconds});
      }
    }
  }
  return run;
}

ScenarioRun run_scenario(const ScenarioSpec& spec, const std::vector<Method>& methods,
                         const MlpConfig& nn_config, std::uint64_t master_seed,
                         const HarnessOptions& options, AbsMeanCache* cache) {
  return run_scenario(spec, methods, make_mlp_trainer(nn_config), master_seed, options, cache);
}

Standardizer Standardizer::fit(const DenseMatrix& x) {
  Standardizer s;
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  s.means_.assign(p, 0.0);
  s.scales_.assign(p, 1.0);
  if (n == 0) return s;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < p; ++c) s.means_[c] += x(r, c);
  }
  for (auto& m : s.means_) m /= static_cast<double>(n);
  if (n < 2) return s;
  std::vector<double> ss(p, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < p; ++c) {
      const double d = x(r, c) - s.means_[c];
      ss[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < p; ++c) {
    const double sd = std::sqrt(ss[c] / static_cast<double>(n - 1));
    s.scales_[c] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

DenseMatrix Standardizer::apply(const DenseMatrix& x) const {
  if (x.cols() != means_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "standardizer fitted on a different column count");
  }
  DenseMatrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - means_[c]) / scales_[c];
  }
  return out;
}

RealDataRun run_real_dataset(const Dataset& data, const std::string& name,
                             const std::vector<Method>& methods, const Trainer& trainer,
                             std::size_t outer_folds, std::size_t repeats,
                             std::uint64_t master_seed, const HarnessOptions& options) {
  require_methods(methods);
  options.conformal.validate();
  data.validate();
  if (outer_folds < 2) throw Error(ErrorCode::InvalidArgument, "outer_folds must be at least 2");
  if (repeats == 0) throw Error(ErrorCode::InvalidArgument, "repeats must be at least 1");
  const std::size_t n = data.size();
  if (n < 2 * outer_folds) {
    throw Error(ErrorCode::InsufficientData, name + ": " + std::to_string(n) +
                                                 " rows cannot support " +
                                                 std::to_string(outer_folds) + " outer folds");
  }

  const std::uint64_t name_key = hash_name(name);
  RealDataRun run;
  run.partitions.reserve(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    RngStream split_stream = derive_stream(master_seed, {kRealDataTag, name_key, r});
    run.partitions.push_back(balanced_folds(n, outer_folds, split_stream));
    std::vector<int> seen(n, 0);
    for (const auto& fold : run.partitions.back()) {
      for (std::size_t i : fold) ++seen[i];
    }
    if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) {
      throw Error(ErrorCode::InvalidArgument, "outer partition is not a partition");
    }
  }

  const std::size_t units = repeats * outer_folds;
  std::vector<std::vector<CellOutcome>> results(units);
  parallel_for(units, options.workers, [&](std::size_t u) {
    const std::size_t r = u / outer_folds;
    const std::size_t f = u % outer_folds;
    const auto& folds = run.partitions[r];
    std::vector<std::size_t> train_rows;
    train_rows.reserve(n);
    for (std::size_t j = 0; j < outer_folds; ++j) {
      if (j != f) train_rows.insert(train_rows.end(), folds[j].begin(), folds[j].end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    Dataset train = data.subset(train_rows);
    Dataset test = data.subset(folds[f]);
    const Standardizer z = Standardizer::fit(train.x);
    train.x = z.apply(train.x);
    test.x = z.apply(test.x);

    const RngStream unit = derive_stream(master_seed, {kRealDataTag, name_key, r}).child(1 + f);
    auto& cells = results[u];
    cells.reserve(methods.size());
    for (Method m : methods) {
      cells.push_back(fit_and_score(m, train, test, trainer, method_stream(unit, m), options));
    }
  });

  for (std::size_t r = 0; r < repeats; ++r) {
    for (std::size_t j = 0; j < methods.size(); ++j) {
      IntervalScore pooled;
      double seconds = 0.0;
      std::optional<std::string> error;
      for (std::size_t f = 0; f < outer_folds; ++f) {
        const CellOutcome& c = results[r * outer_folds + f][j];
        if (c.error && !error) error = "outer fold " + std::to_string(f) + ": " + *c.error;
        pooled.covered += c.score.covered;
        pooled.count += c.score.count;
        pooled.width_sum += c.score.width_sum;
        seconds += c.seconds;
      }
      if (error) {
        run.failures.push_back({name, r, methods[j], *error});
      } else {
        run.records.push_back({methods[j], name, r, pooled.coverage(), pooled.mean_width(), seconds});
      }
    }
  }
  return run;
}

std::vector<PairedRatio> paired_log2_ratios(const std::vector<EvalRecord>& records) {
  std::map<std::pair<std::string, std::size_t>, double> baseline;
  for (const auto& r : records) {
    if (r.method.kind == Method::Kind::split) baseline[{r.scenario, r.replicate}] = r.mean_width;
  }
  std::vector<PairedRatio> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const auto it = baseline.find({r.scenario, r.replicate});
    if (it == baseline.end()) {
      throw Error(ErrorCode::MissingBaseline,
                  "no SC record for " + r.scenario + " replicate " + std::to_string(r.replicate) +
                      " to pair with " + r.method.name());
    }
    const double sc = it->second;
    const double ratio = (sc == r.mean_width) ? 0.0 : std::log2(sc / r.mean_width);
    out.push_back({r.scenario, r.replicate, r.method, ratio});
  }
  return out;
}

std::vector<AggregateSummary> aggregate(const std::vector<EvalRecord>& records, bool with_ratios) {
  if (records.empty()) throw Error(ErrorCode::InvalidArgument, "no records to aggregate");

  struct Group {
    std::vector<double> coverage;
    std::vector<double> width;
    std::vector<double> ratio;
  };
  std::map<std::pair<std::string, Method>, Group> groups;
  for (const auto& r : records) {
    auto& g = groups[{r.scenario, r.method}];
    g.coverage.push_back(r.coverage);
    g.width.push_back(r.mean_width);
  }
  if (with_ratios) {
    for (const auto& pr : paired_log2_ratios(records)) groups[{pr.scenario, pr.method}].ratio.push_back(pr.log2_ratio);
  }

  std::vector<AggregateSummary> out;
  out.reserve(groups.size());
  for (const auto& [key, g] : groups) {
    AggregateSummary s;
    s.scenario = key.first;
    s.method = key.second;
    s.replicates = g.coverage.size();
    s.mean_coverage = mean(g.coverage);
    s.coverage_quartiles = quartiles(g.coverage);
    s.mean_width = mean(g.width);
    if (with_ratios) s.mean_log2_ratio = mean(g.ratio);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace kfcp
