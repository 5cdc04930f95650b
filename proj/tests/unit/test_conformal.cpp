#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "kfcp/conformal.hpp"
#include "kfcp/error.hpp"
#include "kfcp/evalharness.hpp"
#include "kfcp/simgen.hpp"
#include "oracles.hpp"

using namespace kfcp;

namespace {

Dataset unit_abs_data(std::size_t n, double c) {
  Dataset d{DenseMatrix(n, 1), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    d.x(i, 0) = static_cast<double>(i);
    d.y[i] = i % 2 == 0 ? c : -c;
  }
  return d;
}

RegressorPtr fitted(const Trainer& t) {
  RngStream unused = derive_stream(0, {});
  return t(Dataset{DenseMatrix(2, 1), {0.0, 0.0}}, unused);
}

// Predicts the training mean of y.
RegressorPtr fit_mean(const Dataset& d, RngStream&) {
  double s = 0.0;
  for (double y : d.y) s += y;
  return fitted(make_constant_trainer(s / static_cast<double>(d.size())));
}

Trainer true_linear_mean() {
  return make_function_trainer([](std::span<const double> x) { return mean_value(MeanFunction::linear, x); });
}

ScenarioSpec linear_spec(std::size_t n, std::size_t n_test) {
  ScenarioSpec s;
  s.n_train = n;
  s.n_test = n_test;
  return s;
}

}  // namespace

TEST_CASE("conformal quantile examples") {
  const std::vector<double> r{-1, 2, -3, 4, 5, -6, 7, 8, -9};
  CHECK(conformal_rank(9, 0.9).rank == 9);
  CHECK_FALSE(conformal_rank(9, 0.9).clipped);
  CHECK(conformal_quantile(r, 0.9) == 9.0);
  CHECK(conformal_quantile(std::vector<double>{-2.5}, 0.3) == 2.5);
  CHECK(conformal_quantile(std::vector<double>{-2.5}, 0.99) == 2.5);
  CHECK(conformal_quantile(std::vector<double>(7, 0.0), 0.9) == 0.0);
  CHECK(conformal_rank(9, 0.5).rank == 5);
  CHECK(conformal_rank(3, 0.9).clipped);
  CHECK(conformal_rank(3, 0.9).rank == 3);
  try {
    (void)conformal_quantile(std::vector<double>{}, 0.9);
    FAIL("expected EmptyResiduals");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyResiduals);
  }
}

TEST_CASE("conformal quantile equals the brute-force oracle") {
  RngStream s = derive_stream(100, {});
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 1 + s.uniform_index(300);
    std::vector<double> r(m);
    // Some cases draw from a small integer set to force ties.
    const bool ties = trial % 3 == 0;
    for (double& v : r) v = ties ? static_cast<double>(s.uniform_index(7)) - 3.0 : s.std_normal();
    const double level = s.uniform(0.01, 0.999);
    INFO("m=" << m << " level=" << level);
    CHECK(conformal_quantile(r, level) == oracle::brute_force_conformal_quantile(r, level));
  }
}

TEST_CASE("half-width is non-increasing in alpha") {
  RngStream s = derive_stream(101, {});
  std::vector<double> r(200);
  for (double& v : r) v = s.std_normal();
  double prev = INFINITY;
  for (double alpha = 0.01; alpha < 0.99; alpha += 0.01) {
    const double q = conformal_quantile(r, 1.0 - alpha);
    CHECK(q <= prev);
    prev = q;
  }
}

TEST_CASE("split conformal with a constant trainer") {
  const Dataset d = unit_abs_data(40, 1.0);
  const ConformalOptions opts;
  const ConformalModel m = split_conformal(d, make_constant_trainer(0.0), opts, derive_stream(1, {}));
  CHECK(m.half_width == 1.0);
  CHECK(m.residuals.size() == 20);
  const auto iv = predict_interval(m, std::vector<double>{3.0});
  CHECK(iv.lower == -1.0);
  CHECK(iv.upper == 1.0);

  const ConformalModel again = split_conformal(d, make_constant_trainer(0.0), opts, derive_stream(1, {}));
  CHECK(again.residuals.index == m.residuals.index);
  CHECK(again.half_width == m.half_width);

  // Odd n: the fitting half takes the extra row.
  const ConformalModel odd = split_conformal(unit_abs_data(41, 1.0), make_constant_trainer(0.0), opts,
                                             derive_stream(1, {}));
  CHECK(odd.residuals.size() == 20);
}

TEST_CASE("split conformal at the top rank returns the largest residual") {
  RngStream s = derive_stream(102, {});
  Dataset d{DenseMatrix(20, 1), std::vector<double>(20)};
  for (double& y : d.y) y = s.std_normal();
  ConformalOptions opts;
  opts.alpha = 1.0 / 11.0;  // m = 10 residuals -> rank ceil(10/11 * 11) = 10
  const ConformalModel m = split_conformal(d, make_constant_trainer(0.0), opts, derive_stream(2, {}));
  double biggest = 0.0;
  for (double r : m.residuals.residuals) biggest = std::max(biggest, std::abs(r));
  CHECK(m.half_width == biggest);
}

TEST_CASE("k-fold conformal with a constant trainer") {
  for (std::size_t k : {2, 3, 5, 10}) {
    const ConformalModel m = kfold_conformal(unit_abs_data(60, 2.5), make_constant_trainer(0.0), k,
                                             ConformalOptions{}, derive_stream(3, {}));
    CHECK(m.half_width == 2.5);
    CHECK(m.models.size() == k);
  }
}

TEST_CASE("k-fold partitions are complete and disjoint") {
  RngStream s = derive_stream(103, {});
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + s.uniform_index(9);
    const std::size_t n = 2 * k + s.uniform_index(200);
    RngStream fs = s.child(static_cast<std::uint64_t>(trial));
    const auto folds = balanced_folds(n, k, fs);
    REQUIRE(folds.size() == k);
    std::vector<int> seen(n, 0);
    std::size_t lo = n, hi = 0;
    for (const auto& f : folds) {
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
      for (std::size_t i : f) ++seen[i];
    }
    CHECK(hi - lo <= 1);
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    // First n % k folds get the extra element.
    for (std::size_t j = 0; j < k; ++j) CHECK(folds[j].size() == n / k + (j < n % k ? 1 : 0));
  }

  Dataset d{DenseMatrix(100, 1), std::vector<double>(100)};
  RngStream ys = derive_stream(104, {});
  for (double& y : d.y) y = ys.std_normal();
  const ConformalModel m = kfold_conformal(d, make_constant_trainer(0.0), 5, ConformalOptions{},
                                           derive_stream(4, {}));
  REQUIRE(m.residuals.size() == 100);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(m.residuals.index[i] == i);
    CHECK(m.residuals.residuals[i] == d.y[i]);
    CHECK(m.residuals.source_fold[i] < 5);
  }
}

TEST_CASE("degenerate trainer gives equal split and k-fold widths on constant y") {
  Dataset d{DenseMatrix(50, 1), std::vector<double>(50, 3.0)};
  const auto sc = split_conformal(d, make_constant_trainer(1.0), ConformalOptions{}, derive_stream(5, {}));
  const auto k5 = kfold_conformal(d, make_constant_trainer(1.0), 5, ConformalOptions{}, derive_stream(5, {}));
  CHECK(sc.half_width == 2.0);
  CHECK(sc.half_width == k5.half_width);
}

TEST_CASE("preconditions") {
  const Trainer t = make_constant_trainer(0.0);
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ConfigError;
  };
  CHECK(code_of([&] { split_conformal(unit_abs_data(3, 1.0), t, {}, derive_stream(0, {})); }) ==
        ErrorCode::InsufficientData);
  CHECK(code_of([&] { kfold_conformal(unit_abs_data(9, 1.0), t, 5, {}, derive_stream(0, {})); }) ==
        ErrorCode::InsufficientData);
  CHECK(code_of([&] { kfold_conformal(unit_abs_data(9, 1.0), t, 1, {}, derive_stream(0, {})); }) ==
        ErrorCode::InvalidArgument);
  ConformalOptions bad;
  bad.alpha = 1.0;
  CHECK(code_of([&] { split_conformal(unit_abs_data(10, 1.0), t, bad, derive_stream(0, {})); }) ==
        ErrorCode::InvalidArgument);

  const auto m = split_conformal(unit_abs_data(10, 1.0), t, {}, derive_stream(0, {}));
  CHECK(code_of([&] { predict_interval(m, std::vector<double>{1.0, 2.0}); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("intervals are symmetric with constant width") {
  ConformalModel m;
  m.method = Method::split();
  m.split_center = SplitCenter::first_half;
  m.models = {fitted(make_function_trainer([](std::span<const double> x) { return 2.0 * x[0]; }))};
  m.half_width = 1.5;
  m.lower_offset = -1.5;
  m.upper_offset = 1.5;
  m.input_dim = 1;
  m.alpha = 0.1;
  const auto a = predict_interval(m, std::vector<double>{1.0});
  CHECK(a.center == 2.0);
  CHECK(a.lower == 0.5);
  CHECK(a.upper == 3.5);
  const auto b = predict_interval(m, std::vector<double>{4.0});
  CHECK(b.center == 8.0);
  CHECK(b.width() == a.width());
  m.half_width = m.lower_offset = m.upper_offset = 0.0;
  const auto z = predict_interval(m, std::vector<double>{1.0});
  CHECK(z.lower == z.center);
  CHECK(z.upper == z.center);
}

TEST_CASE("method names") {
  CHECK(Method::split().name() == "SC");
  CHECK(Method::kfold(5).name() == "k5");
  CHECK(Method::parse("sc") == Method::split());
  CHECK(Method::parse("k10") == Method::kfold(10));
  CHECK_THROWS_AS(Method::parse("k1"), Error);
  CHECK_THROWS_AS(Method::parse("kx"), Error);
  CHECK(Method::split() < Method::kfold(2));
  CHECK(Method::kfold(2) < Method::kfold(10));
}

TEST_CASE("marginal coverage with the true mean") {
  const ScenarioSpec spec = linear_spec(500, 200);
  const ScenarioGenerator gen(spec, 0.0);
  const Trainer oracle = true_linear_mean();
  for (Method method : {Method::split(), Method::kfold(2), Method::kfold(5), Method::kfold(10)}) {
    std::size_t covered = 0, total = 0;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
      const auto sim = gen.generate(derive_stream(200, {rep}));
      const auto model = fit_conformal(method, sim.train, oracle, ConformalOptions{}, derive_stream(201, {rep}));
      const auto score = score_intervals(model, sim.test);
      covered += score.covered;
      total += score.count;
    }
    const double cov = static_cast<double>(covered) / static_cast<double>(total);
    INFO(method.name() << " coverage " << cov);
    CHECK(std::abs(cov - 0.9) <= 0.02);
  }
}

TEST_CASE("half-width approaches the normal quantile for large n") {
  const ScenarioGenerator gen(linear_spec(5000, 10), 0.0);
  const auto sim = gen.generate(derive_stream(300, {}));
  const auto model = kfold_conformal(sim.train, true_linear_mean(), 5, ConformalOptions{}, derive_stream(301, {}));
  CHECK(std::abs(model.half_width - 1.6449) <= 0.05);
}

TEST_CASE("k-fold center modes") {
  const Trainer mean_trainer = fit_mean;
  Dataset d{DenseMatrix(20, 1), std::vector<double>(20)};
  for (std::size_t i = 0; i < 20; ++i) d.y[i] = static_cast<double>(i);
  const std::vector<double> x{0.0};

  ConformalOptions refit;
  const auto a = kfold_conformal(d, mean_trainer, 4, refit, derive_stream(6, {}));
  CHECK(a.center(x) == doctest::Approx(9.5));

  ConformalOptions avg;
  avg.kfold_center = CenterMode::average;
  const auto b = kfold_conformal(d, mean_trainer, 4, avg, derive_stream(6, {}));
  double expect = 0.0;
  for (const auto& fm : b.models) expect += fm->predict(x);
  CHECK(b.center(x) == doctest::Approx(expect / 4.0));
  CHECK(b.half_width == a.half_width);
}

TEST_CASE("split center modes share the half-width") {
  RngStream s = derive_stream(105, {});
  Dataset d{DenseMatrix(30, 1), std::vector<double>(30)};
  for (double& y : d.y) y = 5.0 + s.std_normal();
  const Trainer mean_trainer = fit_mean;
  ConformalOptions half;
  half.split_center = SplitCenter::first_half;
  ConformalOptions full;
  full.split_center = SplitCenter::refit;
  const auto a = split_conformal(d, mean_trainer, half, derive_stream(7, {}));
  const auto b = split_conformal(d, mean_trainer, full, derive_stream(7, {}));
  CHECK(a.half_width == b.half_width);
  double all = 0.0;
  for (double y : d.y) all += y;
  const std::vector<double> x{0.0};
  CHECK(b.center(x) == doctest::Approx(all / 30.0));
  CHECK(a.center(x) == a.models[0]->predict(x));
}

TEST_CASE("signed two-sided variant") {
  Dataset d{DenseMatrix(199, 1), std::vector<double>(199)};
  RngStream s = derive_stream(106, {});
  for (double& y : d.y) y = s.std_normal() + 1.0;
  ConformalOptions opts;
  opts.quantile_mode = QuantileMode::signed_two_sided;
  const auto m = kfold_conformal(d, make_constant_trainer(0.0), 2, opts, derive_stream(8, {}));
  std::vector<double> sorted = m.residuals.residuals;
  std::sort(sorted.begin(), sorted.end());
  // m = 199: lower rank floor(0.05 * 200) = 10, upper rank ceil(0.95 * 200) = 190.
  CHECK(m.lower_offset == sorted[9]);
  CHECK(m.upper_offset == sorted[189]);
  const auto iv = predict_interval(m, std::vector<double>{0.0});
  CHECK(iv.lower == sorted[9]);
  CHECK(iv.upper == sorted[189]);
}
