// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "hiba/data_synth.hpp"
#include "hiba/errors.hpp"
#include "hiba/trainer.hpp"
#include "test_util.hpp"

namespace {

using namespace hiba;

TrainConfig small_train(std::size_t steps = 40) {
  TrainConfig c;
  c.model.patch_size = 4;
  c.model.context_length = 84;
  c.model.d_model = 8;
  c.model.d_ff = 16;
  c.model.num_layers = 3;
  c.model.heads_q = 2;
  c.model.heads_kv = 1;
  c.model.horizons = {4, 8};
  c.total_steps = steps;
  c.batch_size = 4;
  c.lr_init = 1e-3;
  c.seed = 11;
  return c;
}

struct TestCorpus {
  std::vector<Series> series;
  std::vector<Tier> tiers;
};

TestCorpus sine_corpus() {
  GeneratorSpec spec;
  spec.min_length = 120;
  spec.max_length = 160;
  spec.max_components = 2;
  spec.kernel_weights = {0, 1, 0, 0, 0};
  spec.periods = {8, 12};
  spec.waveforms = {Waveform::sine};
  spec.seed = 4;
  TestCorpus c;
  c.series = generate(spec, 12);
  c.tiers.assign(c.series.size(), Tier::high);
  return c;
}

BatchStream stream_for(const TestCorpus& c, const TrainConfig& cfg) {
  return BatchStream(c.series, c.tiers, cfg.seed, cfg.model.context_length, cfg.model.horizons.back());
}

TEST(LrSchedule, Examples) {
  TrainConfig c;
  c.total_steps = 1000;
  c.warmup_ratio = 0.01;
  c.lr_init = 1e-4;
  EXPECT_EQ(c.warmup_steps(), 10u);
  EXPECT_EQ(lr_schedule(0, c), 0.0);
  EXPECT_NEAR(lr_schedule(5, c), 5e-5, 1e-18);
  EXPECT_NEAR(lr_schedule(10, c), 1e-4, 1e-18);
  EXPECT_NEAR(lr_schedule(505, c), 1e-6 + 0.5 * (1e-4 - 1e-6), 1e-16);
  EXPECT_NEAR(lr_schedule(1000, c), 1e-6, 1e-18);
  double prev = lr_schedule(10, c);
  for (std::size_t s = 11; s <= 1000; ++s) {
    const double lr = lr_schedule(s, c);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
  EXPECT_THROW(lr_schedule(1001, c), ContractViolation);
}

TEST(LrSchedule, WarmupRoundsUp) {
  TrainConfig c;
  c.total_steps = 150;
  c.warmup_ratio = 0.01;
  EXPECT_EQ(c.warmup_steps(), 2u);
  c.warmup_ratio = 0.0;
  EXPECT_EQ(lr_schedule(0, c), c.lr_init);
}

TEST(ClipGlobalNorm, PreservesDirection) {
  std::vector<double> a{3, 0}, b{0, 4};
  std::vector<std::span<double>> g{a, b};
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(a[0], 0.6, 1e-15);
  EXPECT_NEAR(b[1], 0.8, 1e-15);
  std::vector<double> c{0.1, 0.2};
  std::vector<std::span<double>> small{c};
  clip_global_norm(small, 1.0);
  EXPECT_EQ(c, (std::vector<double>{0.1, 0.2}));
}

TEST(Trainer, FirstAdamStepMovesEachWeightByAtMostLr) {
  const auto corpus = sine_corpus();
  TrainState<double> state(small_train());
  const auto before = state.model.parameters();
  std::vector<std::vector<double>> w0;
  for (const auto& [n, p] : before) w0.emplace_back(p.data().begin(), p.data().end());
  const auto batch = stream_for(corpus, state.config).batch(0, 4);
  const auto m = train_step(state, batch);
  EXPECT_EQ(m.step, 1u);
  EXPECT_EQ(m.lr, lr_schedule(1, state.config));
  const auto after = state.model.parameters();
  double moved = 0;
  for (std::size_t i = 0; i < after.size(); ++i) {
    const auto w = after[i].second.data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double d = std::abs(w[j] - w0[i][j]);
      EXPECT_LE(d, m.lr * (1 + 1e-9));
      moved = std::max(moved, d);
    }
  }
  EXPECT_GT(moved, 0.5 * m.lr);
}

TEST(Trainer, RepeatedStepsOnOneBatchReduceLoss) {
  const auto corpus = sine_corpus();
  auto cfg = small_train(200);
  cfg.warmup_ratio = 0.0;
  TrainState<double> state(cfg);
  const auto batch = stream_for(corpus, cfg).batch(0, 4);
  const double first = train_step(state, batch).loss;
  double last = first;
  for (int i = 0; i < 199; ++i) last = train_step(state, batch).loss;
  EXPECT_LT(last, 0.7 * first);
}

TEST(Trainer, SameSeedGivesIdenticalCurves) {
  const auto corpus = sine_corpus();
  const auto cfg = small_train(8);
  TrainState<float> a(cfg), b(cfg);
  const auto la = train(a, stream_for(corpus, cfg), 8);
  std::vector<StepMetrics> lb;
  train(b, stream_for(corpus, cfg), 8, [&lb](const StepMetrics& m) { lb.push_back(m); });
  ASSERT_EQ(la.size(), 8u);
  ASSERT_EQ(lb.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(la[i].loss, lb[i].loss);
    EXPECT_EQ(la[i].grad_norm, lb[i].grad_norm);
  }
}

TEST(Trainer, StopsAtTotalSteps) {
  const auto corpus = sine_corpus();
  const auto cfg = small_train(3);
  TrainState<float> s(cfg);
  EXPECT_EQ(train(s, stream_for(corpus, cfg), 100).size(), 3u);
  EXPECT_EQ(s.step, 3u);
  EXPECT_THROW(train_step(s, stream_for(corpus, cfg).batch(3, 2)), ContractViolation);
}

TEST(TrainConfig, KeyValueRoundTripAndValidation) {
  auto c = small_train();
  KeyValues kv;
  c.to_kv(kv);
  EXPECT_EQ(TrainConfig::from_kv(KeyValues::parse(kv.serialize())).serialize(), c.serialize());
  KeyValues bad;
  bad.set("train.lr_init", "0");
  EXPECT_THROW(TrainConfig::from_kv(bad), ContractViolation);
}

TEST(Trainer, MetricsJson) {
  const auto s = metrics_json(StepMetrics{3, 0.5, 2.0, 1e-4});
  EXPECT_NE(s.find("\"step\":3"), std::string::npos);
  EXPECT_NE(s.find("\"loss\":0.5"), std::string::npos);
}

}  // namespace
