// SPDX-License-Identifier: Apache-2.0
#include "hiba/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "hiba/errors.hpp"

namespace hiba {

namespace {

constexpr double kVarianceFloor = 1e-10;

constexpr std::array<std::string_view, 5> kKernelNames{"linear_trend", "periodic", "smooth_bump",
                                                       "white_noise", "level_shift"};

Waveform parse_waveform(std::string_view s) {
  if (s == "sine") return Waveform::sine;
  if (s == "sawtooth") return Waveform::sawtooth;
  if (s == "square") return Waveform::square;
  throw ContractViolation("unknown waveform '" + std::string(s) + "'");
}

std::vector<double> observed_values(const Series& s) {
  std::vector<double> out;
  out.reserve(s.length());
  for (std::size_t i = 0; i < s.length(); ++i) {
    if (s.observed[i]) out.push_back(s.values[i]);
  }
  return out;
}

double variance(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size());
}

// Residuals of the least-squares line through (t, x_t).
std::vector<double> detrend(std::span<const double> x) {
  const auto n = static_cast<double>(x.size());
  const double tm = (n - 1.0) / 2.0;
  const double xm = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double dt = static_cast<double>(t) - tm;
    sxy += dt * (x[t] - xm);
    sxx += dt * dt;
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  std::vector<double> r(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    r[t] = x[t] - (xm + slope * (static_cast<double>(t) - tm));
  }
  return r;
}

// Pearson correlation between x[0, n-lag) and x[lag, n).
double lag_correlation(std::span<const double> x, std::size_t lag) {
  const std::size_t m = x.size() - lag;
  double ma = 0.0, mb = 0.0;
  for (std::size_t t = 0; t < m; ++t) {
    ma += x[t];
    mb += x[t + lag];
  }
  ma /= static_cast<double>(m);
  mb /= static_cast<double>(m);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t t = 0; t < m; ++t) {
    const double a = x[t] - ma, b = x[t + lag] - mb;
    sab += a * b;
    saa += a * a;
    sbb += b * b;
  }
  const double floor = kVarianceFloor * static_cast<double>(m);
  return sab / std::sqrt(std::max(saa, floor) * std::max(sbb, floor));
}

}  // namespace

std::string_view to_string(Waveform w) {
  switch (w) {
    case Waveform::sine: return "sine";
    case Waveform::sawtooth: return "sawtooth";
    case Waveform::square: return "square";
  }
  return "sine";
}

std::string_view to_string(KernelKind k) { return kKernelNames[static_cast<std::size_t>(k)]; }

void GeneratorSpec::validate() const {
  require(min_length >= 1 && min_length <= max_length, "generator: need 1 <= min_length <= max_length");
  require(max_components >= 1, "generator: max_components must be >= 1");
  double total = 0.0;
  for (double w : kernel_weights) {
    require(w >= 0.0, "generator: kernel weights must be non-negative");
    total += w;
  }
  require(total > 0.0, "generator: at least one kernel must have positive weight");
  if (kernel_weights[static_cast<std::size_t>(KernelKind::periodic)] > 0.0) {
    require(!periods.empty() && !waveforms.empty(), "generator: periodic kernel needs periods and waveforms");
    for (double p : periods) require(p > 0.0, "generator: periods must be positive");
  }
  require(amplitude_min >= 0.0 && amplitude_min <= amplitude_max, "generator: bad amplitude range");
  require(noise_min >= 0.0 && noise_min <= noise_max, "generator: bad noise range");
  require(bump_width_min > 0.0 && bump_width_min <= bump_width_max, "generator: bad bump width range");
}

GeneratorSpec GeneratorSpec::from_kv(const KeyValues& kv, const std::string& prefix, GeneratorSpec s) {
  const auto key = [&](std::string_view name) { return prefix + std::string(name); };
  s.min_length = kv.get_uint(key("min_length"), s.min_length);
  s.max_length = kv.get_uint(key("max_length"), s.max_length);
  s.max_components = kv.get_uint(key("max_components"), s.max_components);
  for (std::size_t i = 0; i < kKernelNames.size(); ++i) {
    s.kernel_weights[i] = kv.get_double(key("weight." + std::string(kKernelNames[i])), s.kernel_weights[i]);
  }
  s.periods = kv.get_doubles(key("periods"), s.periods);
  if (kv.has(key("waveforms"))) {
    s.waveforms.clear();
    std::string list = kv.get_string(key("waveforms"), "");
    for (char& c : list) {
      if (c == '[' || c == ']' || c == ',' || c == '"') c = ' ';
    }
    std::size_t pos = 0;
    while (pos < list.size()) {
      const auto b = list.find_first_not_of(' ', pos);
      if (b == std::string::npos) break;
      const auto e = list.find(' ', b);
      s.waveforms.push_back(parse_waveform(list.substr(b, e == std::string::npos ? e : e - b)));
      pos = e == std::string::npos ? list.size() : e;
    }
  }
  s.amplitude_min = kv.get_double(key("amplitude_min"), s.amplitude_min);
  s.amplitude_max = kv.get_double(key("amplitude_max"), s.amplitude_max);
  s.slope_max = kv.get_double(key("slope_max"), s.slope_max);
  s.noise_min = kv.get_double(key("noise_min"), s.noise_min);
  s.noise_max = kv.get_double(key("noise_max"), s.noise_max);
  s.bump_width_min = kv.get_double(key("bump_width_min"), s.bump_width_min);
  s.bump_width_max = kv.get_double(key("bump_width_max"), s.bump_width_max);
  s.frequency = parse_frequency(kv.get_string(key("frequency"), std::string(to_string(s.frequency))));
  s.seed = kv.get_uint(key("seed"), s.seed);
  s.validate();
  return s;
}

void GeneratorSpec::to_kv(KeyValues& kv, const std::string& prefix) const {
  kv.set(prefix + "min_length", std::to_string(min_length));
  kv.set(prefix + "max_length", std::to_string(max_length));
  kv.set(prefix + "max_components", std::to_string(max_components));
  for (std::size_t i = 0; i < kKernelNames.size(); ++i) {
    kv.set(prefix + "weight." + std::string(kKernelNames[i]), format_double(kernel_weights[i]));
  }
  kv.set(prefix + "periods", format_list(periods));
  std::string w = "[";
  for (std::size_t i = 0; i < waveforms.size(); ++i) {
    w += (i ? ", " : "") + std::string(to_string(waveforms[i]));
  }
  kv.set(prefix + "waveforms", w + "]");
  kv.set(prefix + "amplitude_min", format_double(amplitude_min));
  kv.set(prefix + "amplitude_max", format_double(amplitude_max));
  kv.set(prefix + "slope_max", format_double(slope_max));
  kv.set(prefix + "noise_min", format_double(noise_min));
  kv.set(prefix + "noise_max", format_double(noise_max));
  kv.set(prefix + "bump_width_min", format_double(bump_width_min));
  kv.set(prefix + "bump_width_max", format_double(bump_width_max));
  kv.set(prefix + "frequency", std::string(to_string(frequency)));
  kv.set(prefix + "seed", std::to_string(seed));
}

double waveform_value(Waveform w, double cycles) {
  const double frac = cycles - std::floor(cycles);
  switch (w) {
    case Waveform::sine: return std::sin(2.0 * std::numbers::pi * frac);
    case Waveform::sawtooth: return 2.0 * frac - 1.0;
    case Waveform::square: return frac < 0.5 ? 1.0 : -1.0;
  }
  return 0.0;
}

Series generate_one(const GeneratorSpec& spec, std::size_t index,
                    std::vector<KernelComponent>* components) {
  spec.validate();
  CounterRng rng = CounterRng(spec.seed).split(index);
  const std::size_t length =
      spec.min_length + rng.below(spec.max_length - spec.min_length + 1);
  const std::size_t count = 1 + rng.below(spec.max_components);

  const double total_weight =
      std::accumulate(spec.kernel_weights.begin(), spec.kernel_weights.end(), 0.0);
  std::vector<KernelComponent> picked;
  for (std::size_t c = 0; c < count; ++c) {
    double u = rng.uniform() * total_weight;
    std::size_t kind = 0;
    while (kind + 1 < spec.kernel_weights.size() && (spec.kernel_weights[kind] == 0.0 || u >= spec.kernel_weights[kind])) {
      u -= spec.kernel_weights[kind];
      ++kind;
    }
    while (spec.kernel_weights[kind] == 0.0) --kind;
    KernelComponent k;
    k.kind = static_cast<KernelKind>(kind);
    const auto len = static_cast<double>(length);
    switch (k.kind) {
      case KernelKind::linear_trend:
        k.slope = rng.uniform(-spec.slope_max, spec.slope_max);
        k.intercept = rng.uniform(-1.0, 1.0);
        break;
      case KernelKind::periodic:
        k.waveform = spec.waveforms[rng.below(spec.waveforms.size())];
        k.period = spec.periods[rng.below(spec.periods.size())];
        k.amplitude = rng.uniform(spec.amplitude_min, spec.amplitude_max);
        k.phase = rng.uniform();
        break;
      case KernelKind::smooth_bump:
        k.amplitude = rng.uniform(spec.amplitude_min, spec.amplitude_max) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        k.center = rng.uniform(0.0, len);
        k.width = rng.uniform(spec.bump_width_min, spec.bump_width_max);
        break;
      case KernelKind::white_noise:
        k.amplitude = rng.uniform(spec.noise_min, spec.noise_max);
        break;
      case KernelKind::level_shift:
        k.amplitude = rng.uniform(spec.amplitude_min, spec.amplitude_max) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        k.center = std::floor(rng.uniform(0.1, 0.9) * len);
        break;
    }
    picked.push_back(k);
  }

  std::vector<double> values(length, 0.0);
  for (const auto& k : picked) {
    // Noise draws come from a dedicated child stream so other kernels stay
    // independent of the series length.
    CounterRng noise = rng.split(values.size());
    for (std::size_t t = 0; t < length; ++t) {
      const auto tt = static_cast<double>(t);
      switch (k.kind) {
        case KernelKind::linear_trend: values[t] += k.intercept + k.slope * tt; break;
        case KernelKind::periodic:
          // fmod keeps integer periods exactly periodic in floating point.
          values[t] += k.amplitude * waveform_value(k.waveform, std::fmod(tt, k.period) / k.period + k.phase);
          break;
        case KernelKind::smooth_bump: {
          const double z = (tt - k.center) / k.width;
          values[t] += k.amplitude * std::exp(-0.5 * z * z);
          break;
        }
        case KernelKind::white_noise: values[t] += k.amplitude * noise.normal(); break;
        case KernelKind::level_shift: values[t] += tt >= k.center ? k.amplitude : 0.0; break;
      }
    }
  }
  if (components) *components = picked;
  return make_series("synth-" + std::to_string(index), std::move(values), {}, spec.frequency);
}

std::vector<Series> generate(const GeneratorSpec& spec, std::size_t count) {
  std::vector<Series> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_one(spec, i));
  return out;
}

Series amplitude_modulate(const Series& series, double depth, double cycle_length, double phase) {
  require(depth >= 0.0 && depth <= 0.5, "amplitude_modulate: depth must be in [0, 0.5]");
  require(cycle_length > 0.0, "amplitude_modulate: cycle length must be positive");
  Series out = series;
  for (std::size_t t = 0; t < out.length(); ++t) {
    if (!out.observed[t]) continue;
    const double env =
        1.0 + depth * std::sin(2.0 * std::numbers::pi * (static_cast<double>(t) / cycle_length + phase));
    out.values[t] *= env;
  }
  return out;
}

Series censor_at_quantile(const Series& series, double q) {
  require(q >= 0.0 && q <= 1.0, "censor: quantile must be in [0, 1]");
  std::vector<double> obs = observed_values(series);
  if (obs.empty()) return series;
  std::sort(obs.begin(), obs.end());
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(q * static_cast<double>(obs.size()) - 1e-12)));
  const double threshold = obs[std::min(k, obs.size()) - 1];
  Series out = series;
  for (std::size_t t = 0; t < out.length(); ++t) {
    if (out.observed[t] && out.values[t] < threshold) out.values[t] = threshold;
  }
  return out;
}

Series augment(const Series& series, AugmentMode mode, CounterRng& rng) {
  require(series.length() >= 8, "augment: series must have at least 8 values");
  const auto len = static_cast<double>(series.length());
  switch (mode) {
    case AugmentMode::amplitude_modulation: {
      const double depth = rng.uniform(0.1, 0.5);
      const double cycle = rng.uniform(len, 4.0 * len);
      return amplitude_modulate(series, depth, cycle, rng.uniform());
    }
    case AugmentMode::censor: return censor_at_quantile(series, rng.uniform(0.05, 0.3));
  }
  return series;
}

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::high: return "high";
    case Tier::mid: return "mid";
    case Tier::low: return "low";
  }
  return "mid";
}

Tier parse_tier(std::string_view text) {
  if (text == "high") return Tier::high;
  if (text == "mid") return Tier::mid;
  if (text == "low") return Tier::low;
  throw ContractViolation("unknown tier '" + std::string(text) + "'");
}

Tier classify(const QualityProfile& p, const TierThresholds& th) {
  if ((p.periodicity_strength > th.periodicity_high || p.trend_strength > th.trend_high) &&
      p.noise_level < th.noise_high_max) {
    return Tier::high;
  }
  if (p.noise_level > th.noise_low) return Tier::low;
  return Tier::mid;
}

QualityProfile score_predictability(const Series& series, const TierThresholds& thresholds) {
  const std::vector<double> x = observed_values(series);
  require(x.size() >= 16, "score_predictability: needs at least 16 observed values");
  QualityProfile p;
  const double var_x = variance(x);
  if (var_x <= kVarianceFloor) {
    p.predictability_tier = Tier::high;
    return p;
  }
  const std::vector<double> resid = detrend(x);
  p.trend_strength = std::clamp(1.0 - variance(resid) / var_x, 0.0, 1.0);

  double best = 0.0;
  for (std::size_t lag = 2; lag <= x.size() / 2; ++lag) best = std::max(best, lag_correlation(resid, lag));
  p.periodicity_strength = std::clamp(best, 0.0, 1.0);

  std::vector<double> diff(x.size() - 1);
  for (std::size_t t = 1; t < x.size(); ++t) diff[t - 1] = x[t] - x[t - 1];
  p.noise_level = std::sqrt(variance(diff)) / std::sqrt(var_x);
  p.predictability_tier = classify(p, thresholds);
  return p;
}

double TierWeights::of(Tier t) const {
  switch (t) {
    case Tier::high: return high;
    case Tier::mid: return mid;
    case Tier::low: return low;
  }
  return mid;
}

WeightedSampler::WeightedSampler(std::span<const Tier> tiers, TierWeights weights) {
  require(!tiers.empty(), "sampler: empty corpus");
  double total = 0.0;
  for (auto t : tiers) {
    const double w = weights.of(t);
    require(w > 0.0, "sampler: tier weights must be positive");
    probabilities_.push_back(w);
    total += w;
  }
  double acc = 0.0;
  for (auto& p : probabilities_) {
    p /= total;
    acc += p;
    cumulative_.push_back(acc);
  }
  cumulative_.back() = 1.0;
}

std::size_t WeightedSampler::sample(CounterRng& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), size() - 1);
}

void assign_sampling_weights(std::span<QualityProfile> profiles, TierWeights weights) {
  if (profiles.empty()) return;
  std::vector<Tier> tiers;
  for (const auto& p : profiles) tiers.push_back(p.predictability_tier);
  const WeightedSampler sampler(tiers, weights);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    profiles[i].sampling_weight = sampler.probabilities()[i];
  }
}

TrainingWindow draw_window(const Series& series, std::size_t context_length,
                           std::size_t future_length, CounterRng& rng) {
  const std::size_t t = series.length();
  require(t >= 2, "draw_window: series '" + series.id + "' needs at least 2 values");
  require(context_length >= 1, "draw_window: context length must be >= 1");
  const std::size_t lo = std::min(context_length, t - 1);
  const std::size_t cut = lo + rng.below(t - lo);
  const std::size_t start = cut > context_length ? cut - context_length : 0;

  TrainingWindow w;
  w.context.id = series.id;
  w.context.frequency = series.frequency;
  w.context.values.assign(series.values.begin() + static_cast<long>(start),
                          series.values.begin() + static_cast<long>(cut));
  w.context.observed.assign(series.observed.begin() + static_cast<long>(start),
                            series.observed.begin() + static_cast<long>(cut));
  w.future.assign(future_length, 0.0);
  w.future_observed.assign(future_length, 0);
  for (std::size_t f = 0; f < future_length && cut + f < t; ++f) {
    w.future[f] = series.values[cut + f];
    w.future_observed[f] = series.observed[cut + f];
  }
  return w;
}

BatchStream::BatchStream(const std::vector<Series>& corpus, std::span<const Tier> tiers,
                         std::uint64_t seed, std::size_t context_length, std::size_t future_length,
                         double augment_prob, TierWeights weights)
    : corpus_(&corpus),
      sampler_(tiers, weights),
      rng_(CounterRng(seed).split(0xba7c4)),
      context_length_(context_length),
      future_length_(future_length),
      augment_prob_(augment_prob) {
  require(!corpus.empty(), "batch stream: empty corpus");
  require(corpus.size() == tiers.size(), "batch stream: one tier per series required");
}

std::vector<TrainingWindow> BatchStream::batch(std::uint64_t step, std::size_t batch_size) const {
  CounterRng rng = rng_.split(step);
  std::vector<TrainingWindow> out;
  out.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const Series* s = &(*corpus_)[sampler_.sample(rng)];
    Series augmented;
    if (augment_prob_ > 0.0 && rng.uniform() < augment_prob_ && s->length() >= 8) {
      const auto mode = rng.uniform() < 0.5 ? AugmentMode::amplitude_modulation : AugmentMode::censor;
      augmented = augment(*s, mode, rng);
      s = &augmented;
    }
    out.push_back(draw_window(*s, context_length_, future_length_, rng));
  }
  return out;
}

}  // namespace hiba
