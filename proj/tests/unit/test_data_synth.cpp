// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "hiba/data_synth.hpp"
#include "hiba/errors.hpp"
#include "test_util.hpp"

namespace {

using namespace hiba;

GeneratorSpec only(KernelKind kind) {
  GeneratorSpec s;
  s.kernel_weights = {0, 0, 0, 0, 0};
  s.kernel_weights[static_cast<std::size_t>(kind)] = 1.0;
  s.max_components = 1;
  return s;
}

TEST(Generate, SinglePeriodicComponentIsExactlyPeriodic) {
  auto spec = only(KernelKind::periodic);
  for (std::size_t i = 0; i < 20; ++i) {
    std::vector<KernelComponent> comps;
    const auto s = generate_one(spec, i, &comps);
    const auto p = static_cast<std::size_t>(comps.at(0).period);
    for (std::size_t t = 0; t + p < s.length(); ++t) ASSERT_EQ(s.values[t], s.values[t + p]) << i;
  }
}

TEST(Generate, LinearTrendHasZeroSecondDifference) {
  const auto spec = only(KernelKind::linear_trend);
  const auto s = generate_one(spec, 3);
  for (std::size_t t = 2; t < s.length(); ++t) {
    EXPECT_NEAR(s.values[t] - 2 * s.values[t - 1] + s.values[t - 2], 0.0, 1e-12);
  }
}

TEST(Generate, DeterministicPerSeedAndIndex) {
  GeneratorSpec spec;
  spec.seed = 42;
  const auto a = generate(spec, 30), b = generate(spec, 30);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].values, b[i].values);
  EXPECT_EQ(generate_one(spec, 17).values, a[17].values);
  spec.seed = 43;
  EXPECT_NE(generate_one(spec, 0).values, a[0].values);
}

TEST(Generate, ComponentCountAndFiniteness) {
  GeneratorSpec spec;
  for (std::size_t i = 0; i < 200; ++i) {
    std::vector<KernelComponent> comps;
    const auto s = generate_one(spec, i, &comps);
    EXPECT_GE(comps.size(), 1u);
    EXPECT_LE(comps.size(), spec.max_components);
    EXPECT_GE(s.length(), spec.min_length);
    EXPECT_LE(s.length(), spec.max_length);
    for (double v : s.values) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(Generate, WaveformShapes) {
  EXPECT_NEAR(waveform_value(Waveform::sine, 0.25), 1.0, 1e-15);
  EXPECT_EQ(waveform_value(Waveform::sawtooth, 0.5), 0.0);
  EXPECT_EQ(waveform_value(Waveform::square, 0.75), -1.0);
  EXPECT_EQ(waveform_value(Waveform::square, 1.25), 1.0);
}

TEST(Augment, UnitEnvelopeIsIdentity) {
  const auto s = generate_one(GeneratorSpec{}, 1);
  EXPECT_EQ(amplitude_modulate(s, 0.0, 50.0, 0.3).values, s.values);
}

TEST(Augment, EnvelopeStaysInRange) {
  const auto s = make_series("ones", std::vector<double>(500, 1.0));
  CounterRng rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto a = augment(s, AugmentMode::amplitude_modulation, rng);
    ASSERT_EQ(a.length(), s.length());
    for (double v : a.values) {
      EXPECT_GE(v, 0.5);
      EXPECT_LE(v, 1.5);
    }
  }
}

TEST(Augment, CensorAtMinimumIsIdentity) {
  const auto s = generate_one(GeneratorSpec{}, 2);
  EXPECT_EQ(censor_at_quantile(s, 0.0).values, s.values);
}

TEST(Augment, CensorAtQuantileClipsOrderStatistic) {
  CounterRng rng(4);
  const auto s = make_series("n", testutil::normals(rng, 101));
  const auto c = censor_at_quantile(s, 0.2);
  auto sorted = s.values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t k = 21;  // ceil(0.2 * 101)
  const double threshold = sorted[k - 1];
  std::size_t at_threshold = 0;
  for (std::size_t t = 0; t < c.length(); ++t) {
    EXPECT_GE(c.values[t], threshold);
    if (c.values[t] == threshold) ++at_threshold;
    if (s.values[t] > threshold) EXPECT_EQ(c.values[t], s.values[t]);
  }
  EXPECT_EQ(at_threshold, k);
}

TEST(Augment, PreservesMask) {
  const auto s = make_series("m", std::vector<double>(20, 2.0), std::vector<std::uint8_t>(20, 1));
  auto masked = s;
  masked.observed[3] = 0;
  masked.values[3] = 0;
  CounterRng rng(5);
  for (auto mode : {AugmentMode::amplitude_modulation, AugmentMode::censor}) {
    const auto a = augment(masked, mode, rng);
    EXPECT_EQ(a.observed, masked.observed);
    EXPECT_EQ(a.values[3], 0.0);
  }
  EXPECT_THROW(augment(make_series("short", {1, 2, 3}), AugmentMode::censor, rng), ContractViolation);
}

TEST(Score, PureSineIsStronglyPeriodic) {
  std::vector<double> v(200);
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = std::sin(2 * std::numbers::pi * double(t) / 24.0);
  const auto p = score_predictability(make_series("sine", v));
  EXPECT_GE(p.periodicity_strength, 0.95);
  EXPECT_EQ(p.predictability_tier, Tier::high);
}

TEST(Score, WhiteNoiseHasNoTrendOrPeriod) {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed);
    const auto p = score_predictability(make_series("noise", testutil::normals(rng, 256)));
    if (p.trend_strength <= 0.1 && p.periodicity_strength <= 0.3) ++ok;
    EXPECT_EQ(p.predictability_tier, Tier::low);
  }
  EXPECT_GE(ok, 19);
}

TEST(Score, PureLineIsTrend) {
  std::vector<double> v(64);
  for (std::size_t t = 0; t < v.size(); ++t) v[t] = 0.5 * double(t) - 3;
  const auto p = score_predictability(make_series("line", v));
  EXPECT_GE(p.trend_strength, 0.99);
  EXPECT_EQ(p.predictability_tier, Tier::high);
}

TEST(Score, ConstantSeriesIsHighTier) {
  const auto p = score_predictability(make_series("c", std::vector<double>(32, 4.0)));
  EXPECT_EQ(p.predictability_tier, Tier::high);
  EXPECT_THROW(score_predictability(make_series("short", std::vector<double>(15, 1.0))), ContractViolation);
}

TEST(Score, TierThresholds) {
  QualityProfile p;
  p.periodicity_strength = 0.7;
  p.noise_level = 0.4;
  EXPECT_EQ(classify(p), Tier::high);
  p.noise_level = 0.6;
  EXPECT_EQ(classify(p), Tier::mid);
  p.noise_level = 1.3;
  EXPECT_EQ(classify(p), Tier::low);
  p = {};
  p.trend_strength = 0.85;
  p.noise_level = 0.1;
  EXPECT_EQ(classify(p), Tier::high);
}

TEST(Sampler, ClosedFormProbabilities) {
  const std::vector<Tier> tiers{Tier::high, Tier::high, Tier::low};
  const WeightedSampler s(tiers);
  EXPECT_NEAR(s.probabilities()[0], 0.3 / 0.7, 1e-15);
  EXPECT_NEAR(s.probabilities()[1], 0.3 / 0.7, 1e-15);
  EXPECT_NEAR(s.probabilities()[2], 0.1 / 0.7, 1e-15);
  const std::vector<Tier> one{Tier::mid, Tier::mid, Tier::mid, Tier::mid};
  const WeightedSampler uniform(one);
  for (double p : uniform.probabilities()) EXPECT_DOUBLE_EQ(p, 0.25);
  EXPECT_THROW(WeightedSampler(std::vector<Tier>{}), ContractViolation);
}

TEST(Sampler, EmpiricalFrequenciesMatchWeights) {
  const std::vector<Tier> tiers{Tier::high, Tier::mid, Tier::mid, Tier::low, Tier::high, Tier::low};
  const WeightedSampler s(tiers);
  const std::size_t draws = 100000;
  // Over 20 streams the chi-square statistic (5 dof) exceeds its 5% critical
  // value about once; more than 4 exceedances would be a 0.3% event.
  int exceed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed);
    std::vector<double> counts(tiers.size(), 0);
    for (std::size_t i = 0; i < draws; ++i) counts[s.sample(rng)] += 1;
    double chi2 = 0;
    std::map<Tier, double> tier_freq, tier_target;
    for (std::size_t i = 0; i < tiers.size(); ++i) {
      const double expected = draws * s.probabilities()[i];
      chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
      tier_freq[tiers[i]] += counts[i] / draws;
      tier_target[tiers[i]] += s.probabilities()[i];
    }
    exceed += chi2 > 11.07;
    for (const auto& [tier, f] : tier_freq) EXPECT_NEAR(f, tier_target[tier], 0.02);
  }
  EXPECT_LE(exceed, 4);
}

TEST(Sampler, AssignedWeightsSumToOne) {
  std::vector<QualityProfile> profiles(5);
  profiles[0].predictability_tier = Tier::high;
  profiles[3].predictability_tier = Tier::low;
  assign_sampling_weights(profiles);
  double total = 0;
  for (const auto& p : profiles) {
    EXPECT_GT(p.sampling_weight, 0.0);
    total += p.sampling_weight;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Windows, ContextAndFutureAreContiguous) {
  std::vector<double> v(100);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(i);
  const auto s = make_series("ramp", v);
  CounterRng rng(8);
  for (int i = 0; i < 50; ++i) {
    const auto w = draw_window(s, 30, 10, rng);
    ASSERT_GE(w.context.length(), 1u);
    ASSERT_LE(w.context.length(), 30u);
    const double last = w.context.values.back();
    EXPECT_EQ(w.future[0], last + 1);
    for (std::size_t f = 0; f < 10; ++f) {
      if (last + 1 + f < 100) {
        EXPECT_EQ(w.future_observed[f], 1);
        EXPECT_EQ(w.future[f], last + 1 + f);
      } else {
        EXPECT_EQ(w.future_observed[f], 0);
      }
    }
  }
}

TEST(BatchStream, ReplayIsIdentical) {
  GeneratorSpec spec;
  const auto corpus = generate(spec, 10);
  const std::vector<Tier> tiers(10, Tier::mid);
  const BatchStream a(corpus, tiers, 5, 64, 16, 0.5), b(corpus, tiers, 5, 64, 16, 0.5);
  for (std::uint64_t step : {0u, 3u, 3u, 100u}) {
    const auto x = a.batch(step, 4), y = b.batch(step, 4);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(x[i].context.values, y[i].context.values);
      EXPECT_EQ(x[i].future, y[i].future);
    }
  }
  EXPECT_NE(a.batch(1, 4)[0].context.values, a.batch(2, 4)[0].context.values);
  EXPECT_THROW(BatchStream(std::vector<Series>{}, std::vector<Tier>{}, 1, 8, 8), ContractViolation);
}

}  // namespace
