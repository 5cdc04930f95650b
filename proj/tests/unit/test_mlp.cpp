#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "kfcp/error.hpp"
#include "kfcp/mlp.hpp"
#include "kfcp/rng.hpp"
#include "oracles.hpp"

using namespace kfcp;

namespace {

MlpConfig small_config(std::size_t in, std::vector<std::size_t> hidden, Activation act) {
  MlpConfig c;
  c.input_dim = in;
  c.hidden_layers = std::move(hidden);
  c.activation = act;
  return c;
}

// y = x1 + x2 + N(0, 0.01), x ~ N(0, I_2).
Dataset linear_task(std::size_t n, RngStream& s) {
  Dataset d{DenseMatrix(n, 2), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    d.x(i, 0) = s.std_normal();
    d.x(i, 1) = s.std_normal();
    d.y[i] = d.x(i, 0) + d.x(i, 1) + 0.1 * s.std_normal();
  }
  return d;
}

}  // namespace

TEST_CASE("xavier init respects the Glorot bound") {
  MlpConfig cfg = small_config(10, {15}, Activation::relu);
  RngStream s = derive_stream(1, {});
  const MlpRegressor m = xavier_init(cfg, s);
  const double bound = std::sqrt(6.0 / 25.0);
  CHECK(bound == doctest::Approx(0.4899).epsilon(1e-4));
  for (double w : m.parameters().weights[0].values()) CHECK(std::abs(w) <= bound);
  for (double b : m.parameters().biases[0]) CHECK(b == 0.0);
  CHECK_FALSE(m.trained());
}

TEST_CASE("xavier init is reproducible and has the expected variance") {
  MlpConfig cfg = small_config(100, {100}, Activation::relu);
  RngStream a = derive_stream(2, {});
  RngStream b = derive_stream(2, {});
  const MlpRegressor m1 = xavier_init(cfg, a);
  CHECK(m1.parameters() == xavier_init(cfg, b).parameters());

  const auto w = m1.parameters().weights[0].values();
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size() - 1);
  CHECK(std::abs(var - 0.01) <= 0.002);
}

TEST_CASE("forward on hand-set parameters") {
  MlpConfig cfg = small_config(2, {1}, Activation::relu);
  MlpRegressor zero(cfg);
  const std::vector<double> x{1.0, 2.0};
  CHECK(forward(zero, x) == 0.0);

  MlpRegressor m(cfg);
  m.parameters().weights[0] = DenseMatrix(1, 2, {1.0, 1.0});
  m.parameters().weights[1] = DenseMatrix(1, 1, {2.0});
  CHECK(forward(m, x) == 6.0);
  CHECK(forward(m, x) == forward(m, x));
  CHECK(m.predict(x) == 6.0);

  try {
    (void)forward(m, std::vector<double>{1.0});
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("loss and gradient on a one-weight chain") {
  // Width-1 relu hidden unit with unit input weight, so the network is
  // y-hat = w * x for x > 0; (wx - y)^2 with x=2, y=10, w=1.
  MlpConfig cfg = small_config(1, {1}, Activation::relu);
  MlpRegressor m(cfg);
  m.parameters().weights[0] = DenseMatrix(1, 1, {1.0});
  m.parameters().weights[1] = DenseMatrix(1, 1, {1.0});
  const auto lg = mse_loss_and_gradients(m, DenseMatrix(1, 1, {2.0}), std::vector<double>{10.0});
  CHECK(lg.loss == doctest::Approx(64.0));
  CHECK(lg.gradients.weights[1](0, 0) == doctest::Approx(-32.0));
  CHECK(lg.gradients.biases[1][0] == doctest::Approx(-16.0));
}

TEST_CASE("perfect predictions give zero loss and zero gradient") {
  MlpConfig cfg = small_config(3, {4, 3}, Activation::tanh);
  RngStream s = derive_stream(3, {});
  const MlpRegressor m = xavier_init(cfg, s);
  DenseMatrix bx(5, 3);
  for (double& v : bx.values()) v = s.std_normal();
  std::vector<double> by(5);
  for (std::size_t i = 0; i < 5; ++i) by[i] = forward(m, bx.row(i));
  auto lg = mse_loss_and_gradients(m, bx, by);
  CHECK(lg.loss == 0.0);
  lg.gradients.for_each([](double g) { CHECK(g == 0.0); });

  CHECK_THROWS_AS(mse_loss_and_gradients(m, bx, std::vector<double>(4)), Error);
  CHECK_THROWS_AS(mse_loss_and_gradients(m, DenseMatrix(5, 2), by), Error);
}

TEST_CASE("analytic gradients match central differences on random networks") {
  RngStream s = derive_stream(4, {});
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t in = 1 + s.uniform_index(4);
    std::vector<std::size_t> hidden(1 + s.uniform_index(2));
    for (auto& w : hidden) w = 1 + s.uniform_index(5);
    const Activation act = trial % 2 == 0 ? Activation::relu : Activation::tanh;
    const MlpConfig cfg = small_config(in, hidden, act);
    MlpRegressor m = xavier_init(cfg, s);
    // Zero biases put dead-layer pre-activations exactly on the ReLU kink; jitter to a generic point.
    m.parameters().for_each([&](double& theta) { theta += 0.1 * s.std_normal(); });
    const std::size_t b = 1 + s.uniform_index(8);
    DenseMatrix bx(b, in);
    for (double& v : bx.values()) v = s.std_normal();
    std::vector<double> by(b);
    for (double& v : by) v = s.std_normal();

    const auto check = oracle::check_gradients(m, bx, by);
    INFO("trial " << trial << " max rel err " << check.max_relative_error);
    CHECK(check.entries == ParameterSet::zeros(cfg).count());
    CHECK(check.violations == 0);
  }
}

TEST_CASE("adam step") {
  MlpConfig cfg = small_config(1, {1}, Activation::relu);
  cfg.learning_rate = 0.001;

  SUBCASE("zero gradient leaves parameters unchanged") {
    RngStream s = derive_stream(5, {});
    MlpRegressor m = xavier_init(cfg, s);
    const ParameterSet before = m.parameters();
    AdamState st = AdamState::zeros(cfg);
    adam_step(m, st, ParameterSet::zeros(cfg));
    CHECK(m.parameters() == before);
    CHECK(st.step_count == 1);
  }

  SUBCASE("first step with unit gradient moves by lr / (1 + eps)") {
    MlpRegressor m(cfg);
    AdamState st = AdamState::zeros(cfg);
    ParameterSet g = ParameterSet::zeros(cfg);
    g.weights[1](0, 0) = 1.0;
    adam_step(m, st, g);
    CHECK(m.parameters().weights[1](0, 0) == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK(m.parameters().weights[0](0, 0) == 0.0);
  }

  SUBCASE("identical inputs give identical updates") {
    RngStream s = derive_stream(6, {});
    MlpRegressor a = xavier_init(cfg, s);
    MlpRegressor b = a;
    AdamState sa = AdamState::zeros(cfg);
    AdamState sb = AdamState::zeros(cfg);
    ParameterSet g = ParameterSet::zeros(cfg);
    g.for_each([&](double& v) { v = s.std_normal(); });
    adam_step(a, sa, g);
    adam_step(b, sb, g);
    CHECK(a.parameters() == b.parameters());
  }

  SUBCASE("incongruent state is rejected") {
    MlpRegressor m(cfg);
    AdamState st = AdamState::zeros(small_config(2, {1}, Activation::relu));
    CHECK_THROWS_AS(adam_step(m, st, ParameterSet::zeros(cfg)), Error);
  }
}

TEST_CASE("training recovers a near-noiseless linear map") {
  RngStream s = derive_stream(7, {});
  const Dataset train_set = linear_task(200, s);
  const Dataset test_set = linear_task(1000, s);
  const MlpConfig cfg = MlpConfig::simulation_defaults(2);
  const MlpRegressor m = train(cfg, train_set, derive_stream(7, {1}));
  CHECK(m.trained());
  CHECK(m.parameters().all_finite());
  double mse = 0.0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const double r = forward(m, test_set.x.row(i)) - test_set.y[i];
    mse += r * r;
  }
  mse /= static_cast<double>(test_set.size());
  CHECK(mse < 0.05);
}

TEST_CASE("smoothed training loss decreases") {
  RngStream s = derive_stream(8, {});
  const Dataset d = linear_task(200, s);
  MlpConfig cfg = MlpConfig::simulation_defaults(2);
  cfg.iterations = 5000;
  std::vector<double> losses;
  (void)train(cfg, d, derive_stream(8, {1}), [&](std::size_t, double loss) { losses.push_back(loss); });
  REQUIRE(losses.size() == 5000);
  auto window = [&](std::size_t end) {
    return std::accumulate(losses.begin() + static_cast<std::ptrdiff_t>(end - 100),
                           losses.begin() + static_cast<std::ptrdiff_t>(end), 0.0) / 100.0;
  };
  CHECK(window(5000) < window(100));
}

TEST_CASE("training is deterministic and counts steps exactly") {
  RngStream s = derive_stream(9, {});
  const Dataset d = linear_task(50, s);
  MlpConfig cfg = MlpConfig::simulation_defaults(2);
  cfg.iterations = 300;
  const MlpRegressor a = train(cfg, d, derive_stream(9, {1}));
  const MlpRegressor b = train(cfg, d, derive_stream(9, {1}));
  CHECK(a.parameters() == b.parameters());
  CHECK_FALSE(a.parameters() == train(cfg, d, derive_stream(9, {2})).parameters());

  cfg.iterations = 1;
  std::size_t steps = 0;
  (void)train(cfg, d, derive_stream(9, {1}), [&](std::size_t step, double) { steps = step; });
  CHECK(steps == 1);
}

TEST_CASE("predictions depend only on the learned parameters") {
  MlpConfig cfg = small_config(3, {5, 5}, Activation::relu);
  RngStream s = derive_stream(10, {});
  const MlpRegressor m = xavier_init(cfg, s);
  const MlpRegressor copy(cfg, m.parameters(), true);
  const std::vector<double> x{0.3, -1.2, 2.0};
  CHECK(forward(m, x) == forward(copy, x));
}

TEST_CASE("config validation and divergence") {
  MlpConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = MlpConfig{};
  cfg.hidden_layers = {};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = MlpConfig{};
  cfg.hidden_layers = {3, 0};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = MlpConfig{};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(parse_activation("tanh") == Activation::tanh);
  CHECK_THROWS_AS(parse_activation("sigmoid"), Error);

  RngStream s = derive_stream(11, {});
  Dataset d = linear_task(20, s);
  for (double& y : d.y) y *= 1e200;
  MlpConfig wild = MlpConfig::simulation_defaults(2);
  wild.learning_rate = 10.0;
  wild.iterations = 200;
  try {
    (void)train(wild, d, derive_stream(11, {1}));
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
  }
}

TEST_CASE("paper recipes") {
  const MlpConfig sim = MlpConfig::simulation_defaults(10);
  CHECK(sim.hidden_layers == std::vector<std::size_t>{15, 15});
  CHECK(sim.batch_size == 32);
  CHECK(sim.iterations == 20000);
  CHECK(sim.learning_rate == 3e-4);
  const MlpConfig real = MlpConfig::real_data_defaults(4);
  CHECK(real.hidden_layers == std::vector<std::size_t>{10, 10});
  CHECK(real.batch_size == 16);
  CHECK(real.iterations == 25000);
  CHECK(real.input_dim == 4);
}
