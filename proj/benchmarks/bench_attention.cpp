// SPDX-License-Identifier: Apache-2.0
// Forward cost of a HIBA stack against the same stack with dense causal attention.
#include <benchmark/benchmark.h>

#include "hiba/hiba_block.hpp"
#include "hiba/trainer.hpp"

namespace {

using namespace hiba;

struct Stack {
  std::vector<HibaParams<float>> layers;
  ad::Tensor<float> x;
};

Stack make_stack(std::size_t n, std::size_t d, std::size_t num_layers) {
  CounterRng rng(1);
  Stack s;
  for (std::size_t l = 0; l < num_layers; ++l) s.layers.push_back(HibaParams<float>::init(rng, d, 4 * d, 4, 2));
  std::vector<float> v(n * d);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  s.x = ad::Tensor<float>::from({n, d}, std::move(v));
  return s;
}

void run_stack(benchmark::State& state, bool dense) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Stack s = make_stack(n, 64, 6);
  BlockToggles toggles;
  toggles.standard_attention = dense;
  ad::NoGradGuard no_grad;
  PairCounter counter;
  hiba_forward<float>(s.x, s.layers, 1, n, BlockSchedule{}, toggles, &counter);
  for (auto _ : state) {
    auto y = hiba_forward<float>(s.x, s.layers, 1, n, BlockSchedule{}, toggles);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.counters["score_pairs"] = static_cast<double>(counter.pairs);
  state.counters["tokens/s"] = benchmark::Counter(static_cast<double>(n), benchmark::Counter::kIsIterationInvariantRate);
}

void BM_HibaStack(benchmark::State& state) { run_stack(state, false); }
void BM_DenseStack(benchmark::State& state) { run_stack(state, true); }

BENCHMARK(BM_HibaStack)->Arg(84)->Arg(168)->Arg(336)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DenseStack)->Arg(84)->Arg(168)->Arg(336)->Unit(benchmark::kMillisecond);

// One optimizer step of the desk model, batch 16.
void BM_DeskTrainStep(benchmark::State& state) {
  TrainConfig cfg;
  cfg.total_steps = 1000000;
  GeneratorSpec spec;
  spec.seed = 3;
  const auto corpus = generate(spec, 32);
  const std::vector<Tier> tiers(corpus.size(), Tier::mid);
  const BatchStream stream(corpus, tiers, 3, cfg.model.context_length, cfg.model.horizons.back());
  TrainState<float> train_state(cfg);
  for (auto _ : state) {
    const auto batch = stream.batch(train_state.step, cfg.batch_size);
    benchmark::DoNotOptimize(train_step(train_state, batch).loss);
  }
}
BENCHMARK(BM_DeskTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
