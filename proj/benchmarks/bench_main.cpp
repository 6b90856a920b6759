#include "dynnet/error_correction.hpp"
#include "dynnet/koopman.hpp"
#include "dynnet/training.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace dynnet;

namespace {

const std::vector<int> kLayers{1, 32, 32, 2};
const Vec kStart{{1.0, 0.0}};

void BM_ResidualStep(benchmark::State& state) {
  const SystemDef sys = catalog_get("harmonic_oscillator");
  TrainConfig cfg;
  cfg.batch_size = static_cast<int>(state.range(0));
  MlpParams p = init_params(kLayers, 1);
  Optimizer opt(cfg.optimizer, p.size());
  Rng rng(1);
  int iter = 0;
  for (auto _ : state) train_step(p, sample_batch(cfg, rng), kStart, sys, opt, iter++);
}
BENCHMARK(BM_ResidualStep)->Arg(64)->Arg(100);

void BM_SurrogateStep(benchmark::State& state) {
  const SystemDef sys = catalog_get("harmonic_oscillator");
  MlpParams p = init_params(kLayers, 1);
  const ErrorEstimate est = estimate_delta_z(residual_profile(p, kStart, sys, 1e-3, M_PI), sys, {1});
  const EcDataset ec = build_ec_dataset(p, est, kStart, 10, 100);
  Optimizer opt(OptimizerConfig{}, p.size());
  Rng rng(1);
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const std::vector<int> batch = sample_ec_batch(ec, n, rng);
    opt.step(p, surrogate_loss_grad(p, ec, batch, kStart).gradient);
  }
}
BENCHMARK(BM_SurrogateStep)->Arg(64)->Arg(100);

void BM_ErrorEstimate(benchmark::State& state) {
  const SystemDef sys = catalog_get("cubic_oscillator");
  const MlpParams p = init_params(kLayers, 1);
  // Short horizon: with untrained weights the estimate blows up before T = pi.
  const ResidualProfile profile = residual_profile(p, kStart, sys, 1e-4, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_delta_z(profile, sys, {2}));
}
BENCHMARK(BM_ErrorEstimate)->Unit(benchmark::kMillisecond);

void BM_DmdFit(benchmark::State& state) {
  const MlpParams p = init_params(kLayers, 1);
  const Vec w = p.flatten();
  SnapshotMatrix s;
  s.observable = Observable::Weights;
  s.columns = Mat(w.size(), 20);
  for (int j = 0; j < 20; ++j) s.columns.col(j) = w * (1.0 + std::pow(0.9, j)) + Vec::Constant(w.size(), 0.01 * std::pow(0.5, j));
  FitOptions options;
  options.rank = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit(s, options));
}
BENCHMARK(BM_DmdFit)->Arg(2)->Arg(0);

}  // namespace

BENCHMARK_MAIN();
