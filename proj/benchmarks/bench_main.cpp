// Costs of the per-iteration building blocks at the default desk scale
// (72x72 images, 64x64 patches, two foreground classes).

#include <ATen/Parallel.h>
#include <ATen/core/grad_mode.h>
#include <benchmark/benchmark.h>

#include "anatomia/corruption.hpp"
#include "anatomia/metrics.hpp"
#include "anatomia/prior.hpp"
#include "anatomia/ssl.hpp"
#include "anatomia/synthdata.hpp"
#include "anatomia/tensor.hpp"

using namespace anatomia;

namespace {

const DatasetSplit& split() {
  static const DatasetSplit s = [] {
    SynthConfig cfg;
    DatasetSplit out;
    for (int i = 0; i < 8; ++i) {
      auto c = generate_case(cfg, i);
      if (i < 2) out.labeled.push_back({c.volume, *c.label});
      else if (i < 6) out.unlabeled.push_back(c.volume);
      else out.test.push_back({c.volume, *c.label});
    }
    return out;
  }();
  return s;
}

Network segnet(Strategy s) {
  Rng rng(1);
  return Network::segnet(default_segnet_arch(2, 2, s), rng);
}

Network prior() {
  Rng rng(2);
  return Network::autoencoder(default_dae_arch(2, {64, 64}), rng);
}

at::Tensor batch_input() {
  Rng rng(3);
  auto t = at::empty({4, 1, 64, 64});
  auto* p = t.data_ptr<float>();
  for (std::int64_t i = 0; i < t.numel(); ++i) p[i] = static_cast<float>(rng.normal());
  return t;
}

void BM_SegnetForward(benchmark::State& state) {
  at::set_num_threads(1);
  at::NoGradGuard no_grad;
  auto net = segnet(Strategy::none);
  net.set_mode(Mode::eval);
  const auto x = batch_input();
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_SegnetForward)->Unit(benchmark::kMillisecond);

void BM_DaeMap(benchmark::State& state) {
  at::set_num_threads(1);
  at::NoGradGuard no_grad;
  auto dae = prior();
  dae.set_mode(Mode::eval);
  const auto probs = softmax_channels(batch_input().repeat({1, 3, 1, 1}));
  Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(dae_map(dae, probs, 0.1, rng));
}
BENCHMARK(BM_DaeMap)->Unit(benchmark::kMillisecond);

void BM_SlidingWindow(benchmark::State& state) {
  at::set_num_threads(1);
  auto net = segnet(Strategy::none);
  const auto& volume = split().test.front().volume;
  for (auto _ : state) benchmark::DoNotOptimize(sliding_window_infer(net, volume, {64, 64}, {32, 32}));
}
BENCHMARK(BM_SlidingWindow)->Unit(benchmark::kMillisecond);

void BM_Metrics(benchmark::State& state) {
  const auto& gt = split().test.front().label;
  Rng rng(5);
  const auto pred = corrupt(gt, CorruptionPolicy{}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_case(pred, gt, std::vector<double>{1.0, 1.0}));
}
BENCHMARK(BM_Metrics)->Unit(benchmark::kMicrosecond);

void BM_Corrupt(benchmark::State& state) {
  const auto& gt = split().test.front().label;
  Rng rng(6);
  for (auto _ : state) benchmark::DoNotOptimize(corrupt(gt, CorruptionPolicy{}, rng));
}
BENCHMARK(BM_Corrupt)->Unit(benchmark::kMicrosecond);

// One full training iteration per strategy; the counters record how many
// forward passes each network made.
void BM_SslStep(benchmark::State& state) {
  at::set_num_threads(1);
  const auto strategy = static_cast<Strategy>(state.range(0));
  SslConfig cfg;
  cfg.strategy = strategy;
  cfg.arch = default_segnet_arch(2, 2, strategy);
  cfg.t_max = 1 << 30;
  std::optional<Network> dae;
  if (needs_dae(strategy)) dae = prior();
  SslTrainer trainer(split(), cfg, std::move(dae));
  SslIterationLog row;
  for (auto _ : state) row = trainer.step();
  state.SetLabel(to_string(strategy));
  state.counters["teacher_forwards"] = static_cast<double>(row.forwards_teacher);
  state.counters["prior_forwards"] = static_cast<double>(row.forwards_dae);
}
BENCHMARK(BM_SslStep)
    ->Arg(static_cast<int>(Strategy::supervised))
    ->Arg(static_cast<int>(Strategy::none))
    ->Arg(static_cast<int>(Strategy::anatomical))
    ->Arg(static_cast<int>(Strategy::mcdo))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
