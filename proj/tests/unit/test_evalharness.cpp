#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "kfcp/error.hpp"
#include "kfcp/evalharness.hpp"
#include "kfcp/stats.hpp"

using namespace kfcp;

namespace {

ScenarioSpec small_spec(std::size_t replicates) {
  ScenarioSpec s;
  s.n_train = 200;
  s.n_test = 100;
  s.replicates = replicates;
  return s;
}

Trainer true_linear_mean() {
  return make_function_trainer([](std::span<const double> x) { return mean_value(MeanFunction::linear, x); });
}

EvalRecord rec(Method m, std::size_t rep, double cov, double width, std::string scenario = "s") {
  EvalRecord r;
  r.method = m;
  r.scenario = std::move(scenario);
  r.replicate = rep;
  r.coverage = cov;
  r.mean_width = width;
  return r;
}

Dataset linear_rows(std::size_t n, RngStream& s) {
  Dataset d{DenseMatrix(n, 3), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) d.x(i, j) = 10.0 * j + s.std_normal();
    d.y[i] = d.x(i, 0) - d.x(i, 1) + s.std_normal();
  }
  return d;
}

}  // namespace

TEST_CASE("run_scenario pairs methods on shared data") {
  const std::vector<Method> methods{Method::split(), Method::kfold(5)};
  const ScenarioRun run = run_scenario(small_spec(1), methods, true_linear_mean(), 3, HarnessOptions{});
  REQUIRE(run.records.size() == 2);
  CHECK(run.failures.empty());
  CHECK(run.records[0].method == Method::split());
  CHECK(run.records[1].method == Method::kfold(5));
  CHECK(run.records[0].replicate == run.records[1].replicate);
  CHECK(run.records[0].scenario == "linear_homoscedastic_200");
  for (const auto& r : run.records) {
    CHECK(r.coverage >= 0.0);
    CHECK(r.coverage <= 1.0);
    CHECK(r.mean_width > 0.0);
    CHECK(r.runtime_seconds == 0.0);
  }
}

TEST_CASE("record count is replicates times methods") {
  const std::vector<Method> methods{Method::split(), Method::kfold(2), Method::kfold(10)};
  const ScenarioRun run = run_scenario(small_spec(4), methods, true_linear_mean(), 4, HarnessOptions{});
  CHECK(run.records.size() == 12);
  std::set<std::pair<std::size_t, std::string>> keys;
  for (const auto& r : run.records) keys.insert({r.replicate, r.method.name()});
  CHECK(keys.size() == 12);
}

TEST_CASE("a badly biased regressor still gets valid, wide intervals") {
  // The calibration residuals absorb the bias: coverage stays near nominal, width near 2 * bias.
  const ScenarioRun run = run_scenario(small_spec(20), {Method::split(), Method::kfold(5)},
                                       make_constant_trainer(1e3), 5, HarnessOptions{});
  REQUIRE(run.records.size() == 40);
  for (const auto& s : aggregate(run.records, false)) {
    INFO(s.method.name() << " " << s.mean_coverage);
    CHECK(std::abs(s.mean_coverage - 0.9) <= 0.03);
    CHECK(s.mean_width == doctest::Approx(2e3).epsilon(0.01));
  }
}

TEST_CASE("oracle-regressor smoke run is valid") {
  ScenarioSpec spec = small_spec(50);
  spec.n_train = 500;
  spec.n_test = 200;
  const ScenarioRun run = run_scenario(spec, {Method::split(), Method::kfold(5)}, true_linear_mean(), 6,
                                       HarnessOptions{});
  for (const auto& s : aggregate(run.records, false)) {
    INFO(s.method.name() << " " << s.mean_coverage);
    CHECK(std::abs(s.mean_coverage - 0.9) <= 0.02);
    CHECK_FALSE(s.mean_log2_ratio.has_value());
  }
}

TEST_CASE("records do not depend on the worker count") {
  const std::vector<Method> methods{Method::split(), Method::kfold(5)};
  HarnessOptions one;
  HarnessOptions many;
  many.workers = 8;
  const auto a = run_scenario(small_spec(6), methods, true_linear_mean(), 7, one);
  const auto b = run_scenario(small_spec(6), methods, true_linear_mean(), 7, many);
  CHECK(a.records == b.records);

  ScenarioSpec het = small_spec(3);
  het.error_dist = ErrorDistribution::heteroscedastic;
  AbsMeanCache cache(10000);
  const auto c = run_scenario(het, methods, true_linear_mean(), 7, one, &cache);
  const auto d = run_scenario(het, methods, true_linear_mean(), 7, many, &cache);
  CHECK(c.records == d.records);
}

TEST_CASE("diverging fits are tagged, not fatal") {
  int calls = 0;
  const Trainer bad = [&calls](const Dataset&, RngStream&) -> RegressorPtr {
    ++calls;
    throw Error(ErrorCode::NonFiniteLoss, "diverged");
  };
  const ScenarioRun run = run_scenario(small_spec(2), {Method::split()}, bad, 8, HarnessOptions{});
  CHECK(run.records.empty());
  REQUIRE(run.failures.size() == 2);
  CHECK(run.failures[0].method == Method::split());
  CHECK(run.failures[0].scenario == "linear_homoscedastic_200");
  CHECK(run.failures[0].message.find("diverged") != std::string::npos);
  // One retry per cell.
  CHECK(calls == 4);
}

TEST_CASE("real-data protocol") {
  RngStream s = derive_stream(9, {});
  const Dataset d = linear_rows(120, s);
  const std::vector<Method> methods{Method::split(), Method::kfold(5)};
  const RealDataRun run = run_real_dataset(d, "toy", methods, make_constant_trainer(0.0), 5, 4, 10, HarnessOptions{});
  CHECK(run.records.size() == 8);
  CHECK(run.failures.empty());
  REQUIRE(run.partitions.size() == 4);
  for (const auto& repeat : run.partitions) {
    REQUIRE(repeat.size() == 5);
    std::vector<int> seen(120, 0);
    for (const auto& fold : repeat) {
      CHECK((fold.size() == 24));
      for (std::size_t i : fold) ++seen[i];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
  for (const auto& r : run.records) CHECK(r.scenario == "toy");

  Dataset constant{DenseMatrix(40, 2), std::vector<double>(40, 4.0)};
  const RealDataRun flat = run_real_dataset(constant, "flat", methods, make_constant_trainer(4.0), 5, 2, 11,
                                            HarnessOptions{});
  for (const auto& r : flat.records) {
    CHECK(r.coverage == 1.0);
    CHECK(r.mean_width == 0.0);
  }

  try {
    (void)run_real_dataset(linear_rows(9, s), "tiny", methods, make_constant_trainer(0.0), 5, 1, 1,
                           HarnessOptions{});
    FAIL("expected InsufficientData");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientData);
  }
}

TEST_CASE("standardizer uses training statistics") {
  const DenseMatrix train = DenseMatrix::from_rows({{1, 5}, {3, 5}, {5, 5}});
  const Standardizer z = Standardizer::fit(train);
  CHECK(z.means() == std::vector<double>{3, 5});
  CHECK(z.scales()[0] == doctest::Approx(2.0));
  CHECK(z.scales()[1] == 1.0);
  const DenseMatrix out = z.apply(DenseMatrix::from_rows({{7, 6}}));
  CHECK(out(0, 0) == doctest::Approx(2.0));
  CHECK(out(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("aggregate and paired ratios") {
  const std::vector<EvalRecord> records{
      rec(Method::split(), 0, 0.88, 2.0),
      rec(Method::kfold(5), 0, 0.92, 1.0),
      rec(Method::split(), 1, 0.92, 3.0),
      rec(Method::kfold(5), 1, 0.88, 3.0),
  };
  const auto ratios = paired_log2_ratios(records);
  std::map<std::pair<std::size_t, std::string>, double> by;
  for (const auto& r : ratios) by[{r.replicate, r.method.name()}] = r.log2_ratio;
  CHECK(by.at({0, "k5"}) == 1.0);
  CHECK(by.at({1, "k5"}) == 0.0);
  CHECK(by.at({0, "SC"}) == 0.0);

  const auto summary = aggregate(records, true);
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].method == Method::split());
  CHECK(summary[0].mean_coverage == doctest::Approx(0.90));
  CHECK(summary[1].mean_coverage == doctest::Approx(0.90));
  CHECK(summary[1].mean_width == doctest::Approx(2.0));
  CHECK(*summary[1].mean_log2_ratio == doctest::Approx(0.5));
  CHECK(summary[1].replicates == 2);

  const std::vector<EvalRecord> no_sc{rec(Method::kfold(5), 0, 0.9, 1.0)};
  CHECK_NOTHROW(aggregate(no_sc, false));
  try {
    (void)aggregate(no_sc, true);
    FAIL("expected MissingBaseline");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingBaseline);
  }
  // Ratios only pair records from the same scenario and replicate.
  const std::vector<EvalRecord> unpaired{rec(Method::split(), 0, 0.9, 1.0, "a"), rec(Method::kfold(5), 0, 0.9, 1.0, "b")};
  CHECK_THROWS_AS(paired_log2_ratios(unpaired), Error);
}

TEST_CASE("interpolated quantiles") {
  const std::vector<double> v{4, 1, 3, 2};
  const Quartiles q = quartiles(v);
  CHECK(q.q1 == doctest::Approx(1.75));
  CHECK(q.median == doctest::Approx(2.5));
  CHECK(q.q3 == doctest::Approx(3.25));
  CHECK(interpolated_quantile(v, 0.0) == 1.0);
  CHECK(interpolated_quantile(v, 1.0) == 4.0);
  CHECK(mean(v) == 2.5);
  CHECK_THROWS_AS(interpolated_quantile(std::vector<double>{}, 0.5), Error);
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  parallel_for(0, 4, [&](std::size_t) { FAIL("no work expected"); });
}
