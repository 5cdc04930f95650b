#include <benchmark/benchmark.h>

#include <vector>

#include "kfcp/conformal.hpp"
#include "kfcp/mlp.hpp"
#include "kfcp/rng.hpp"
#include "kfcp/simgen.hpp"

namespace {

using namespace kfcp;

void BM_ConformalQuantile(benchmark::State& state) {
  RngStream s = derive_stream(1, {});
  std::vector<double> r(static_cast<std::size_t>(state.range(0)));
  for (double& v : r) v = s.std_normal();
  for (auto _ : state) benchmark::DoNotOptimize(conformal_quantile(r, 0.9));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ConformalQuantile)->Arg(250)->Arg(5000)->Arg(100000);

void BM_GenerateReplicate(benchmark::State& state) {
  ScenarioSpec spec;
  spec.n_train = static_cast<std::size_t>(state.range(0));
  const ScenarioGenerator gen(spec, 0.0);
  std::uint64_t rep = 0;
  for (auto _ : state) benchmark::DoNotOptimize(gen.generate(derive_stream(2, {rep++})));
}
BENCHMARK(BM_GenerateReplicate)->Arg(500)->Arg(5000);

void BM_TrainStep(benchmark::State& state) {
  ScenarioSpec spec;
  const auto data = ScenarioGenerator(spec, 0.0).generate(derive_stream(3, {})).train;
  MlpConfig cfg = MlpConfig::simulation_defaults(data.dim());
  cfg.iterations = 1000;
  for (auto _ : state) benchmark::DoNotOptimize(train(cfg, data, derive_stream(4, {})));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_GradientBatch(benchmark::State& state) {
  MlpConfig cfg = MlpConfig::simulation_defaults(10);
  RngStream s = derive_stream(5, {});
  const MlpRegressor m = xavier_init(cfg, s);
  DenseMatrix x(32, 10);
  std::vector<double> y(32);
  for (double& v : x.values()) v = s.std_normal();
  for (double& v : y) v = s.std_normal();
  for (auto _ : state) benchmark::DoNotOptimize(mse_loss_and_gradients(m, x, y));
}
BENCHMARK(BM_GradientBatch);

void BM_KfoldConstantTrainer(benchmark::State& state) {
  ScenarioSpec spec;
  spec.n_train = 5000;
  const auto data = ScenarioGenerator(spec, 0.0).generate(derive_stream(6, {})).train;
  const Trainer t = make_constant_trainer(0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kfold_conformal(data, t, static_cast<std::size_t>(state.range(0)), ConformalOptions{},
                                             derive_stream(7, {})));
  }
}
BENCHMARK(BM_KfoldConstantTrainer)->Arg(5)->Arg(10);

}  // namespace

// The packaged libbenchmark_main.a carries LTO bytecode from another GCC; provide main here.
BENCHMARK_MAIN();
