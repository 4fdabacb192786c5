// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hiba/config.hpp"
#include "hiba/random.hpp"
#include "hiba/tokenizer.hpp"

namespace hiba {

enum class Waveform { sine, sawtooth, square };
enum class KernelKind { linear_trend, periodic, smooth_bump, white_noise, level_shift };

std::string_view to_string(Waveform w);
std::string_view to_string(KernelKind k);

/// Additive kernel composition: each series sums 1..max_components kernels
/// drawn from the bank with the given weights.
struct GeneratorSpec {
  std::size_t min_length = 256;
  std::size_t max_length = 512;
  std::size_t max_components = 4;
  /// Draw weight per KernelKind, in enum order; 0 disables a kernel.
  std::array<double, 5> kernel_weights{1.0, 2.0, 0.5, 1.0, 0.3};
  std::vector<double> periods{4, 7, 12, 24, 48, 52};
  std::vector<Waveform> waveforms{Waveform::sine, Waveform::sawtooth, Waveform::square};
  double amplitude_min = 0.5;
  double amplitude_max = 2.0;
  double slope_max = 0.02;
  double noise_min = 0.02;
  double noise_max = 0.5;
  double bump_width_min = 4.0;
  double bump_width_max = 40.0;
  Frequency frequency = Frequency::none;
  std::uint64_t seed = 0;

  void validate() const;
  static GeneratorSpec from_kv(const KeyValues& kv, const std::string& prefix, GeneratorSpec base);
  void to_kv(KeyValues& kv, const std::string& prefix) const;
};

/// One sampled kernel, kept so tests can reconstruct a series exactly.
struct KernelComponent {
  KernelKind kind = KernelKind::periodic;
  Waveform waveform = Waveform::sine;
  double amplitude = 0.0;  // periodic / bump / level shift height; noise std
  double period = 1.0;
  double phase = 0.0;  // in cycles, [0, 1)
  double slope = 0.0;
  double intercept = 0.0;
  double center = 0.0;  // bump center or level-shift onset
  double width = 1.0;
};

/// Periodic waveform value at a phase measured in cycles.
double waveform_value(Waveform w, double cycles);

/// Deterministic in (spec.seed, index).
Series generate_one(const GeneratorSpec& spec, std::size_t index,
                    std::vector<KernelComponent>* components = nullptr);
std::vector<Series> generate(const GeneratorSpec& spec, std::size_t count);

enum class AugmentMode { amplitude_modulation, censor };

/// Multiplies by 1 + depth * sin(2 pi (t / cycle_length + phase)); depth <= 0.5 keeps the
/// envelope in [0.5, 1.5].
Series amplitude_modulate(const Series& series, double depth, double cycle_length, double phase);
/// Clips observed values below the order statistic x_(ceil(q T)) up to it.
Series censor_at_quantile(const Series& series, double q);
/// Random parameters drawn from `rng`: depth in [0.1, 0.5], cycle in [T, 4T]
/// for modulation; q in [0.05, 0.3] for censoring.
Series augment(const Series& series, AugmentMode mode, CounterRng& rng);

enum class Tier { high, mid, low };
std::string_view to_string(Tier t);
Tier parse_tier(std::string_view text);

struct QualityProfile {
  double periodicity_strength = 0.0;
  double trend_strength = 0.0;
  double noise_level = 0.0;
  Tier predictability_tier = Tier::mid;
  double sampling_weight = 0.0;  // filled in by the sampler (normalized)
};

struct TierThresholds {
  double periodicity_high = 0.6;
  double trend_high = 0.8;
  double noise_high_max = 0.5;
  double noise_low = 1.2;
};

/// Requires T >= 16 observed values.
QualityProfile score_predictability(const Series& series, const TierThresholds& thresholds = {});
Tier classify(const QualityProfile& profile, const TierThresholds& thresholds = {});

/// Sampling weights per tier (high, mid, low); default 3:2:1.
struct TierWeights {
  double high = 3.0;
  double mid = 2.0;
  double low = 1.0;
  [[nodiscard]] double of(Tier t) const;
};

/// Draws series indices with probability proportional to their tier weight.
class WeightedSampler {
 public:
  WeightedSampler(std::span<const Tier> tiers, TierWeights weights = {});

  [[nodiscard]] std::size_t size() const { return probabilities_.size(); }
  [[nodiscard]] const std::vector<double>& probabilities() const { return probabilities_; }
  std::size_t sample(CounterRng& rng) const;

 private:
  std::vector<double> probabilities_;
  std::vector<double> cumulative_;
};

/// Fills in each profile's normalized sampling weight.
void assign_sampling_weights(std::span<QualityProfile> profiles, TierWeights weights = {});

/// Context plus the values that follow it (possibly shorter than requested,
/// with the missing tail marked unobserved).
struct TrainingWindow {
  Series context;
  std::vector<double> future;
  std::vector<std::uint8_t> future_observed;
};

/// Cut point uniform over [min(context_length, T - 1), T - 1]; the context is
/// the up-to-context_length values before it.
TrainingWindow draw_window(const Series& series, std::size_t context_length,
                           std::size_t future_length, CounterRng& rng);

/// Deterministic batch stream: batch `step` depends only on (seed, step).
class BatchStream {
 public:
  BatchStream(const std::vector<Series>& corpus, std::span<const Tier> tiers, std::uint64_t seed,
              std::size_t context_length, std::size_t future_length, double augment_prob = 0.0,
              TierWeights weights = {});

  std::vector<TrainingWindow> batch(std::uint64_t step, std::size_t batch_size) const;
  [[nodiscard]] const WeightedSampler& sampler() const { return sampler_; }

 private:
  const std::vector<Series>* corpus_;
  WeightedSampler sampler_;
  CounterRng rng_;
  std::size_t context_length_;
  std::size_t future_length_;
  double augment_prob_;
};

}  // namespace hiba
