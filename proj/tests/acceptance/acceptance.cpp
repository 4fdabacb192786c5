// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hiba/autodiff.hpp"
#include "hiba/checkpoint.hpp"
#include "hiba/data_synth.hpp"
#include "hiba/evaluation.hpp"
#include "hiba/metrics.hpp"
#include "hiba/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace hiba;
using T64 = ad::Tensor<double>;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

ModelConfig grad_config() {
  ModelConfig c;
  c.patch_size = 4;
  c.context_length = 84;
  c.d_model = 8;
  c.d_ff = 16;
  c.num_layers = 2;
  c.heads_q = 2;
  c.heads_kv = 1;
  c.horizons = {4, 8};
  return c;
}

// 1. Intra and inter attention against a dense masked oracle.
Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t n : {6u, 21u, 42u}) {
    for (std::size_t d : {8u, 16u}) {
      for (std::size_t b : {3u, 7u, 21u}) {
        if (n % b != 0) continue;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
          CounterRng rng(1000 * n + 10 * d + seed);
          const auto x = testutil::random_tensor(rng, {n, d});
          CounterRng prng(seed + 77);
          const auto p = AttentionParams<double>::init(prng, d, 2, 1);
          const auto xv = oracle::values(x);
          const auto by_index = [](std::size_t i) { return double(i); };
          const auto by_block = [b](std::size_t i) { return double(i / b); };
          const auto intra = intra_attention(partition(x, b), p);
          const auto inter = inter_attention(partition(x, b), p);
          worst = std::max(worst, oracle::max_abs_diff(oracle::values(intra),
                                                       oracle::dense_attention(xv, n, p, oracle::block_diagonal(b), by_index)));
          worst = std::max(worst, oracle::max_abs_diff(oracle::values(inter),
                                                       oracle::dense_attention(xv, n, p, oracle::strided_causal(b), by_block)));
          ++cases;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-5 && secs < 30.0,
          std::to_string(cases) + " cases, max abs diff " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// 2. End-to-end finite-difference check of every parameter group.
Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  const Model<double> model(grad_config(), 21);
  GeneratorSpec spec;
  spec.min_length = 120;
  spec.max_length = 140;
  spec.seed = 22;
  const auto series = generate(spec, 2);
  std::vector<Tier> tiers(series.size(), Tier::mid);
  const BatchStream stream(series, tiers, 23, 84, 8);
  std::vector<PatchedInput> inputs;
  std::vector<TargetTimeline> timelines;
  const auto batch = stream.batch(0, 2);
  prepare_batch(model, batch, inputs, timelines);
  if (inputs[0].n != 21) return {false, "unexpected token count"};

  std::vector<ad::NamedLeaf> leaves;
  for (const auto& [name, p] : model.parameters()) leaves.push_back({name, p});
  const auto report =
      ad::grad_check([&] { return model.loss(inputs, timelines); }, leaves, 1e-6, 1e-5);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& l : report.leaves) {
    if (l.max_rel_error >= worst) {
      worst = l.max_rel_error;
      worst_name = l.name;
    }
  }
  const double secs = seconds_since(t0);
  return {report.passed && secs < 120.0,
          std::to_string(report.leaves.size()) + " parameter groups, worst rel error " + fmt(worst) +
              " (" + worst_name + "), " + fmt(secs) + " s"};
}

// 3. Outputs up to a 21-aligned boundary ignore everything after it.
Outcome causality() {
  const std::size_t n = 63, d = 16, layers = 6;
  std::vector<HibaParams<double>> params;
  CounterRng prng(31);
  for (std::size_t l = 0; l < layers; ++l) params.push_back(HibaParams<double>::init(prng, d, 2 * d, 2, 1));
  CounterRng rng(32);
  const auto x = testutil::random_tensor(rng, {n, d});
  const auto base = hiba_forward<double>(x, params, 1, n, BlockSchedule{}, {});
  double worst = 0.0, moved = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t boundary = 21 * (1 + rng.below(2));
    const std::size_t start = boundary + rng.below(n - boundary);
    auto xv = oracle::values(x);
    const double scale = std::pow(10.0, rng.uniform(-3.0, 2.0));
    for (std::size_t i = start * d; i < xv.size(); ++i) xv[i] += scale * rng.normal();
    const auto y = hiba_forward<double>(T64::from({n, d}, xv), params, 1, n, BlockSchedule{}, {});
    for (std::size_t i = 0; i < boundary * d; ++i) worst = std::max(worst, std::abs(y.data()[i] - base.data()[i]));
    for (std::size_t i = start * d; i < n * d; ++i) moved = std::max(moved, std::abs(y.data()[i] - base.data()[i]));
  }
  return {worst <= 1e-12 && moved > 0.0,
          "20 perturbations, max change before boundary " + fmt(worst) + ", after " + fmt(moved)};
}

// 4. forecast(a x + b) == a forecast(x) + b.
Outcome affine_equivariance() {
  const Model<double> model(ModelConfig::desk(), 41);
  CounterRng rng(42);
  double worst = 0.0;
  for (int s = 0; s < 10; ++s) {
    const double sigma = std::pow(10.0, rng.uniform(-2.0, 2.0));
    auto x = testutil::normals(rng, 150 + rng.below(60), sigma);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] += sigma * std::sin(0.26 * double(t));
    const auto f = model.forecast(make_series("x", x), 24);
    for (double a : {0.5, 3.0}) {
      for (double b : {-10.0, 7.0}) {
        std::vector<double> y(x);
        for (auto& v : y) v = a * v + b;
        const auto g = model.forecast(make_series("y", y), 24);
        for (std::size_t k = 0; k < f.values.size(); ++k) {
          const double expect = a * f.values[k] + b;
          const double denom = std::max(std::abs(expect), a * sigma);
          worst = std::max(worst, std::abs(g.values[k] - expect) / denom);
        }
      }
    }
  }
  return {worst <= 1e-4, "10 series x 4 transforms, max rel error " + fmt(worst)};
}

// 5. Instrumented score-pair counts at n = 336.
Outcome attention_cost() {
  const std::size_t n = 336, d = 8;
  CounterRng prng(51);
  const auto params = HibaParams<double>::init(prng, d, 2 * d, 2, 1);
  CounterRng rng(52);
  const auto x = testutil::random_tensor(rng, {n, d});
  std::ostringstream detail;
  bool ok = true;
  for (std::size_t b : BlockSchedule{}.sizes) {
    PairCounter counter;
    hiba_block<double>(x, params, 1, n, b, {}, &counter);
    const std::uint64_t got = counter.pairs, want = n * b + n * n / b;
    ok &= counter.per_call.size() == 2 && got == want;
    detail << "B=" << b << ": " << got << "/" << want << "; ";
  }
  BlockToggles dense;
  dense.standard_attention = true;
  PairCounter counter;
  hiba_block<double>(x, params, 1, n, 21, dense, &counter);
  const std::uint64_t want = n * (n + 1) / 2;
  for (auto c : counter.per_call) ok &= c == want;
  ok &= counter.per_call.size() == 2;
  detail << "dense per sublayer: " << counter.per_call.front() << "/" << want;
  return {ok, detail.str()};
}

TrainConfig desk_train(std::uint64_t seed) {
  TrainConfig c;
  c.total_steps = 2000;
  c.batch_size = 16;
  c.lr_init = 1e-3;
  c.seed = seed;
  return c;
}

GeneratorSpec sine_spec(std::uint64_t seed) {
  GeneratorSpec spec;
  spec.kernel_weights = {0, 1, 0, 0, 0};
  spec.max_components = 2;
  spec.periods = {8, 12, 24};
  spec.waveforms = {Waveform::sine};
  spec.min_length = 400;
  spec.max_length = 600;
  spec.seed = seed;
  return spec;
}

// Single period-24 component plus Gaussian noise at 0.25 of its amplitude.
std::vector<Series> noisy_seasonal(std::uint64_t seed, std::size_t count) {
  GeneratorSpec spec = sine_spec(seed);
  spec.max_components = 1;
  spec.periods = {24};
  spec.frequency = Frequency::hourly;
  std::vector<Series> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<KernelComponent> parts;
    auto s = generate_one(spec, i, &parts);
    CounterRng noise = CounterRng(seed + 77).split(i);
    for (auto& v : s.values) v += 0.25 * parts[0].amplitude * noise.normal();
    out.push_back(std::move(s));
  }
  return out;
}

double train_desk(TrainState<float>& state, const std::vector<Series>& corpus) {
  const std::vector<Tier> tiers(corpus.size(), Tier::high);
  const BatchStream stream(corpus, tiers, state.config.seed, state.config.model.context_length,
                           state.config.model.horizons.back());
  const auto t0 = Clock::now();
  train(state, stream, state.config.total_steps);
  return seconds_since(t0);
}

// 6. Desk-scale learning on clean and noisy seasonal corpora.
Outcome desk_learning() {
  const std::size_t ctx = ModelConfig::desk().context_length, h = 24;
  TrainState<float> clean(desk_train(1));
  const double t_clean = train_desk(clean, generate(sine_spec(1), 200));
  double worst = 0.0, sum = 0.0;
  const auto held = generate(sine_spec(999), 50);
  for (const auto& s : held) {
    Series context = s;
    context.values.resize(ctx);
    context.observed.resize(ctx);
    const auto median = clean.model.forecast(context, h).median();
    double mae = 0.0;
    for (std::size_t t = 0; t < h; ++t) mae += std::abs(median[t] - s.values[ctx + t]);
    mae /= double(h);
    const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
    const double ratio = mae / ((*hi - *lo) / 2.0);
    worst = std::max(worst, ratio);
    sum += ratio;
  }
  const double mean_ratio = sum / double(held.size());

  TrainState<float> noisy(desk_train(1));
  const double t_noisy = train_desk(noisy, noisy_seasonal(5, 200));
  auto test = noisy_seasonal(1234, 50);
  for (auto& s : test) {
    s.values.resize(ctx + h);
    s.observed.resize(ctx + h);
  }
  const auto& model = noisy.model;
  const auto records = evaluate(
      test, [&model](const Series& c, std::size_t hz) { return model.forecast(c, hz); },
      model.config().quantiles, EvalOptions{h, 0, 0});
  const auto summary = aggregate(records);

  const bool ok = mean_ratio < 0.1 && summary.overall.scaled_mase < 1.0 && t_clean < 600.0 &&
                  t_noisy < 600.0;
  return {ok, "clean MAE/amplitude mean " + fmt(mean_ratio) + " (worst " + fmt(worst) + ", " +
                  fmt(t_clean) + " s); noisy scaled MASE " + fmt(summary.overall.scaled_mase) +
                  ", scaled CRPS " + fmt(summary.overall.scaled_crps) + " (" + fmt(t_noisy) + " s)"};
}

// 7. Hand-computed metric examples.
Outcome metric_correctness() {
  double worst = 0.0;
  const auto check = [&worst](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  const std::vector<double> ctx{1, 3, 2, 5};
  check(mase(std::vector<double>{4, 6}, std::vector<double>{5, 5.5}, ctx, 1), 0.375);
  const std::vector<double> ramp{0, 1, 2, 3, 4};
  check(mase(seasonal_naive(ramp, 1, 3), std::vector<double>{5, 6, 7}, ramp, 1), 2.0);
  const std::vector<double> alt{0, 10, 1, 11, 2, 12};
  check(mase(seasonal_naive(alt, 2, 2), std::vector<double>{3, 13}, alt, 2), 1.0);
  check(crps_quantile(std::vector<double>{0}, std::vector<double>{0.5}, std::vector<double>{2}), 1.0);
  check(crps_quantile(std::vector<double>{0, 2, 1, 1}, std::vector<double>{0.25, 0.75},
                      std::vector<double>{1, 3}),
        0.625);
  check(geometric_mean(std::vector<double>{0.5, 2.0}), 1.0);
  check(geometric_mean(std::vector<double>{0.25, 1.0, 1.0}), std::cbrt(0.25));
  check(geometric_mean(std::vector<double>{1, 1, 1}), 1.0);
  const bool naive_ok = seasonal_naive(std::vector<double>{1, 2, 3, 4}, 2, 3) == std::vector<double>{3, 4, 3};
  return {worst <= 1e-10 && naive_ok, "8 examples, max abs diff " + fmt(worst)};
}

// 8. Every emitted quantile vector is non-decreasing.
Outcome quantile_monotonicity() {
  ModelConfig cfg = grad_config();
  cfg.horizons = {8, 16};
  std::size_t vectors = 0, bad = 0, forecasts = 0;
  CounterRng rng(81);
  for (std::uint64_t m = 0; m < 10; ++m) {
    const Model<double> model(cfg, 800 + m);
    for (int i = 0; i < 100; ++i) {
      const auto x = testutil::normals(rng, 20 + rng.below(100), rng.uniform(0.1, 10.0));
      const auto f = model.forecast(make_series("r", x), 1 + rng.below(16));
      ++forecasts;
      for (std::size_t t = 0; t < f.horizon; ++t) {
        ++vectors;
        for (std::size_t q = 1; q < f.quantiles.size(); ++q) {
          if (f.at(t, q) < f.at(t, q - 1)) {
            ++bad;
            break;
          }
        }
      }
    }
  }
  return {bad == 0 && forecasts == 1000,
          std::to_string(forecasts) + " forecasts, " + std::to_string(vectors) + " vectors, " +
              std::to_string(bad) + " unsorted"};
}

// 9. Bitwise determinism and save/resume fidelity.
Outcome determinism() {
  TrainConfig cfg;
  cfg.model = grad_config();
  cfg.total_steps = 10;
  cfg.batch_size = 4;
  cfg.lr_init = 1e-3;
  cfg.seed = 91;
  GeneratorSpec spec;
  spec.min_length = 100;
  spec.max_length = 200;
  spec.seed = 92;
  const auto corpus = generate(spec, 16);
  const std::vector<Tier> tiers(corpus.size(), Tier::mid);
  const BatchStream stream(corpus, tiers, cfg.seed, cfg.model.context_length, cfg.model.horizons.back());

  TrainState<float> a(cfg), b(cfg);
  train(a, stream, 10);
  train(b, stream, 10);
  const bool same_runs = encode_checkpoint(a) == encode_checkpoint(b);

  TrainState<double> straight(cfg), first(cfg);
  train(straight, stream, 10);
  train(first, stream, 5);
  auto resumed = decode_checkpoint<double>(encode_checkpoint(first));
  train(resumed, stream, 10);
  const bool resume_ok = encode_checkpoint(straight) == encode_checkpoint(resumed);
  return {same_runs && resume_ok, std::string("identical-seed checkpoints ") +
                                      (same_runs ? "equal" : "differ") + "; resume after 5 of 10 steps " +
                                      (resume_ok ? "bitwise equal" : "differs")};
}

// 10. Each ablation trains and reports its architecture.
Outcome ablation_wiring() {
  const auto corpus = generate(sine_spec(101), 64);
  const char* names[] = {"none", "standard_attention", "causal_intra", "uniform_block_size=7",
                         "single_head"};
  bool ok = true;
  std::ostringstream detail;
  double baseline = 0.0;
  for (const char* name : names) {
    TrainConfig cfg = desk_train(102);
    cfg.total_steps = 100;
    cfg.batch_size = 8;
    if (std::string(name) != "none") apply_ablation(cfg.model, name);
    try {
      TrainState<float> state(cfg);
      const std::vector<Tier> tiers(corpus.size(), Tier::high);
      const BatchStream stream(corpus, tiers, cfg.seed, cfg.model.context_length, cfg.model.horizons.back());
      const auto log = train(state, stream, cfg.total_steps);
      double tail = 0.0;
      for (std::size_t i = log.size() - 20; i < log.size(); ++i) tail += log[i].loss / 20.0;
      if (std::string(name) == "none") baseline = tail;
      std::printf("  ablation %-22s params=%zu final_loss=%.4f (%+.1f%% vs default) | %s\n", name,
                  state.model.parameter_count(), tail, 100.0 * (tail / baseline - 1.0),
                  cfg.model.describe().c_str());
      const std::string desc = cfg.model.describe();
      const std::string key(name);
      if (key == "standard_attention") ok &= desc.find("dense_causal") != std::string::npos;
      if (key == "causal_intra") ok &= desc.find("intra_causal") != std::string::npos;
      if (key.starts_with("uniform_block_size")) ok &= desc.find("schedule=[7]") != std::string::npos;
      if (key == "single_head") ok &= desc.find("active_heads=[24]") != std::string::npos;
    } catch (const std::exception& e) {
      ok = false;
      detail << name << " failed: " << e.what() << "; ";
    }
  }
  detail << "5 variants trained 100 steps";
  return {ok, detail.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"gradient correctness", gradient_correctness},
      {"block-boundary causality", causality},
      {"affine equivariance", affine_equivariance},
      {"attention-cost law", attention_cost},
      {"desk-scale learning", desk_learning},
      {"metric correctness", metric_correctness},
      {"quantile monotonicity", quantile_monotonicity},
      {"determinism and checkpoint fidelity", determinism},
      {"ablation wiring", ablation_wiring},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
