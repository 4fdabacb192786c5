// SPDX-License-Identifier: Apache-2.0
#include "hiba/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "hiba/checkpoint.hpp"
#include "hiba/dataset_io.hpp"
#include "hiba/errors.hpp"
#include "hiba/evaluation.hpp"

namespace hiba::cli {

namespace fs = std::filesystem;
using nlohmann::json;

ResolvedConfig ResolvedConfig::resolve(const KeyValues& kv, const std::vector<std::string>& ablations) {
  ResolvedConfig c;
  c.seed = kv.get_uint("seed", c.seed);

  c.synth_count = kv.get_uint("synth.count", c.synth_count);
  GeneratorSpec spec;
  spec.seed = c.seed;
  c.synth = GeneratorSpec::from_kv(kv, "synth.", spec);

  c.data_path = kv.get_string("data.path", c.data_path);

  TrainConfig train;
  train.seed = c.seed;
  c.train = TrainConfig::from_kv(kv, train);
  for (const auto& a : ablations) apply_ablation(c.train.model, a);
  c.train.validate();
  c.train_precision = kv.get_string("train.precision", c.train_precision);
  require(c.train_precision == "float" || c.train_precision == "double",
          "train.precision must be 'float' or 'double'");
  c.train_log_every = kv.get_uint("train.log_every", c.train_log_every);
  c.train_resume = kv.get_string("train.resume", c.train_resume);

  c.forecast_checkpoint = kv.get_string("forecast.checkpoint", c.forecast_checkpoint);
  c.forecast_horizon = kv.get_uint("forecast.horizon", c.forecast_horizon);

  c.eval_checkpoint = kv.get_string("eval.checkpoint", c.eval_checkpoint);
  c.eval_model = kv.get_string("eval.model", c.eval_model);
  require(c.eval_model == "checkpoint" || c.eval_model == "seasonal_naive",
          "eval.model must be 'checkpoint' or 'seasonal_naive'");
  c.eval_horizon = kv.get_uint("eval.horizon", c.eval_horizon);
  require(c.eval_horizon >= 1, "eval.horizon must be >= 1");
  c.eval_season = kv.get_uint("eval.season", c.eval_season);

  c.bench_tokens = kv.get_uint("bench.tokens", c.bench_tokens);
  c.bench_d_model = kv.get_uint("bench.d_model", c.bench_d_model);
  c.bench_layers = kv.get_uint("bench.layers", c.bench_layers);
  c.bench_heads_q = kv.get_uint("bench.heads_q", c.bench_heads_q);
  c.bench_heads_kv = kv.get_uint("bench.heads_kv", c.bench_heads_kv);
  c.bench_repeats = kv.get_uint("bench.repeats", c.bench_repeats);
  require(c.bench_repeats >= 1, "bench.repeats must be >= 1");

  c.inspect_path = kv.get_string("inspect.path", c.inspect_path);

  kv.reject_unknown("config");
  return c;
}

KeyValues ResolvedConfig::to_kv() const {
  KeyValues kv;
  kv.set("seed", std::to_string(seed));
  kv.set("synth.count", std::to_string(synth_count));
  synth.to_kv(kv, "synth.");
  kv.set("data.path", data_path);
  train.to_kv(kv);
  kv.set("train.precision", train_precision);
  kv.set("train.log_every", std::to_string(train_log_every));
  kv.set("train.resume", train_resume);
  kv.set("forecast.checkpoint", forecast_checkpoint);
  kv.set("forecast.horizon", std::to_string(forecast_horizon));
  kv.set("eval.checkpoint", eval_checkpoint);
  kv.set("eval.model", eval_model);
  kv.set("eval.horizon", std::to_string(eval_horizon));
  kv.set("eval.season", std::to_string(eval_season));
  kv.set("bench.tokens", std::to_string(bench_tokens));
  kv.set("bench.d_model", std::to_string(bench_d_model));
  kv.set("bench.layers", std::to_string(bench_layers));
  kv.set("bench.heads_q", std::to_string(bench_heads_q));
  kv.set("bench.heads_kv", std::to_string(bench_heads_kv));
  kv.set("bench.repeats", std::to_string(bench_repeats));
  kv.set("inspect.path", inspect_path);
  return kv;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out.flush()) throw FormatError("write to '" + path.string() + "' failed");
}

std::ofstream open_for_writing(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  return out;
}

// Loads a checkpoint at its stored width and hands the state to `f`.
template <typename F>
void with_checkpoint(const std::string& path, F&& f) {
  require(!path.empty(), "a checkpoint path is required");
  if (checkpoint_value_bytes(path) == 8) {
    f(load_checkpoint<double>(path));
  } else {
    f(load_checkpoint<float>(path));
  }
}

json forecast_json(const std::string& id, const QuantileForecast& f) {
  json rows = json::array();
  for (std::size_t t = 0; t < f.horizon; ++t) {
    rows.push_back(std::vector<double>(f.values.begin() + t * f.quantiles.size(),
                                       f.values.begin() + (t + 1) * f.quantiles.size()));
  }
  return json{{"id", id},
              {"horizon", f.horizon},
              {"head_horizon", f.head_horizon},
              {"origin_index", f.origin_index},
              {"quantiles", f.quantiles},
              {"values", rows}};
}

void cmd_synth(const ResolvedConfig& c, const fs::path& out, std::ostream& log) {
  const auto series = generate(c.synth, c.synth_count);
  write_jsonl(out / "corpus.jsonl", series);
  Manifest m;
  m.files.push_back({"corpus.jsonl", {}});
  m.profiles = profile_corpus(series);
  write_manifest(out / "manifest.json", m);
  log << "[hiba] synth: " << series.size() << " series";
  for (const auto& [tier, n] : m.tier_counts()) log << ", " << to_string(tier) << "=" << n;
  log << "\n";
}

template <typename T>
void train_with(TrainState<T> state, const Corpus& corpus, const ResolvedConfig& c, const fs::path& out,
                std::ostream& log) {
  const ModelConfig& mc = state.config.model;
  log << "[hiba] model: " << mc.describe() << "\n";
  log << "[hiba] parameters: " << state.model.parameter_count() << "\n";
  const BatchStream stream(corpus.series, corpus.tiers, state.config.seed, mc.context_length,
                           mc.horizons.back(), state.config.augment_prob);
  auto metrics = open_for_writing(out / "metrics.jsonl");
  const auto t0 = std::chrono::steady_clock::now();
  train(state, stream, state.config.total_steps, [&](const StepMetrics& m) {
    metrics << metrics_json(m) << "\n";
    if (c.train_log_every && (m.step % c.train_log_every == 0 || m.step == state.config.total_steps)) {
      log << "[hiba] step " << m.step << " loss " << m.loss << " grad_norm " << m.grad_norm << " lr "
          << m.lr << "\n";
    }
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!metrics.flush()) throw FormatError("write to '" + (out / "metrics.jsonl").string() + "' failed");
  save_checkpoint(out / "checkpoint.bin", state);
  log << "[hiba] train: step " << state.step << " of " << state.config.total_steps << " in " << secs
      << " s; checkpoint " << (out / "checkpoint.bin").string() << "\n";
}

void cmd_train(const ResolvedConfig& c, const fs::path& out, std::ostream& log) {
  require(!c.data_path.empty(), "train: data.path is required");
  const Corpus corpus = load_corpus(c.data_path);
  require(!corpus.series.empty(), "train: corpus '" + c.data_path + "' is empty");
  if (!c.train_resume.empty()) {
    log << "[hiba] resuming from " << c.train_resume << "\n";
    with_checkpoint(c.train_resume, [&](auto state) { train_with(std::move(state), corpus, c, out, log); });
  } else if (c.train_precision == "double") {
    train_with(TrainState<double>(c.train), corpus, c, out, log);
  } else {
    train_with(TrainState<float>(c.train), corpus, c, out, log);
  }
}

void cmd_forecast(const ResolvedConfig& c, const fs::path& out, std::ostream& log) {
  require(!c.data_path.empty(), "forecast: data.path is required");
  const auto series = load_corpus(c.data_path).series;
  with_checkpoint(c.forecast_checkpoint, [&](const auto& state) {
    const auto& mc = state.model.config();
    const std::size_t h = c.forecast_horizon ? c.forecast_horizon : mc.horizons[mc.active_heads().front()];
    auto file = open_for_writing(out / "forecasts.jsonl");
    for (const auto& s : series) file << forecast_json(s.id, state.model.forecast(s, h)).dump() << "\n";
    if (!file.flush()) throw FormatError("write to '" + (out / "forecasts.jsonl").string() + "' failed");
    log << "[hiba] forecast: " << series.size() << " series, horizon " << h << " served by head "
        << mc.horizons[state.model.route_horizon(h)] << "\n";
  });
}

void cmd_eval(const ResolvedConfig& c, const fs::path& out, std::ostream& log) {
  require(!c.data_path.empty(), "eval: data.path is required");
  const auto dataset = load_corpus(c.data_path).series;
  const EvalOptions options{c.eval_horizon, c.eval_season, 0};
  log << "[hiba] eval: " << dataset.size() << " series, " << worker_count() << " workers\n";
  std::vector<EvalRecord> records;
  if (c.eval_model == "seasonal_naive") {
    const auto q = default_quantiles();
    records = evaluate(dataset, seasonal_naive_forecaster(q, c.eval_season), q, options);
  } else {
    with_checkpoint(c.eval_checkpoint, [&](const auto& state) {
      const auto& model = state.model;
      records = evaluate(
          dataset, [&model](const Series& s, std::size_t h) { return model.forecast(s, h); },
          model.config().quantiles, options);
    });
  }
  write_report(out / "records.jsonl", out / "summary.json", records);
  const auto summary = aggregate(records);
  log << "[hiba] eval: scaled MASE " << summary.overall.scaled_mase << ", scaled CRPS "
      << summary.overall.scaled_crps << " over " << summary.overall.count << " series\n";
}

void cmd_bench(const ResolvedConfig& c, const fs::path& out, std::ostream& log) {
  const std::size_t n = c.bench_tokens, d = c.bench_d_model;
  const BlockSchedule schedule;
  require(n % schedule.lcm() == 0, "bench.tokens must be a multiple of " + std::to_string(schedule.lcm()));
  CounterRng rng(c.seed);
  std::vector<HibaParams<float>> layers;
  for (std::size_t l = 0; l < c.bench_layers; ++l) {
    layers.push_back(HibaParams<float>::init(rng, d, 4 * d, c.bench_heads_q, c.bench_heads_kv));
  }
  std::vector<float> xv(n * d);
  for (auto& v : xv) v = static_cast<float>(rng.normal());
  const auto x = ad::Tensor<float>::from({n, d}, xv);
  ad::NoGradGuard no_grad;

  BlockToggles dense;
  dense.standard_attention = true;
  PairCounter hiba_pairs, dense_pairs;
  hiba_forward<float>(x, layers, 1, n, schedule, {}, &hiba_pairs);
  hiba_forward<float>(x, layers, 1, n, schedule, dense, &dense_pairs);

  json report{{"tokens", n}, {"d_model", d}, {"layers", c.bench_layers}};
  bool law_holds = true;
  for (std::size_t l = 0; l < c.bench_layers; ++l) {
    const std::size_t b = schedule.size_for_layer(l);
    const std::uint64_t got = hiba_pairs.per_call[2 * l] + hiba_pairs.per_call[2 * l + 1];
    const std::uint64_t law = n * b + n * n / b;
    law_holds &= got == law;
    report["hiba_layers"].push_back(json{{"layer", l}, {"block_size", b}, {"pairs", got}, {"closed_form", law}});
  }
  const std::uint64_t dense_law = n * (n + 1) / 2;
  bool dense_holds = true;
  for (const auto p : dense_pairs.per_call) dense_holds &= p == dense_law;
  report["dense_pairs_per_sublayer"] = dense_pairs.per_call.empty() ? 0 : dense_pairs.per_call.front();
  report["dense_closed_form"] = dense_law;
  report["hiba_law_holds"] = law_holds;
  report["dense_law_holds"] = dense_holds;

  const auto best_ms = [&](const BlockToggles& toggles) {
    double best = 1e300;
    for (std::size_t r = 0; r < c.bench_repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      hiba_forward<float>(x, layers, 1, n, schedule, toggles);
      best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
  };
  const double hiba_ms = best_ms({}), dense_ms = best_ms(dense);
  report["hiba_ms"] = hiba_ms;
  report["dense_ms"] = dense_ms;
  report["speedup"] = dense_ms / hiba_ms;
  write_file(out / "bench.json", report.dump(2) + "\n");
  log << "[hiba] bench: n=" << n << " d=" << d << " layers=" << c.bench_layers << " pair law "
      << (law_holds ? "holds" : "VIOLATED") << ", dense law " << (dense_holds ? "holds" : "VIOLATED")
      << "; hiba " << hiba_ms << " ms, dense " << dense_ms << " ms (x" << dense_ms / hiba_ms << ")\n";
}

void cmd_inspect(const ResolvedConfig& c, const fs::path& out, std::ostream& log) {
  const fs::path path = c.inspect_path.empty() ? fs::path(c.data_path) : fs::path(c.inspect_path);
  require(!path.empty(), "inspect: inspect.path is required");
  json report{{"path", path.string()}};
  if (path.extension() == ".bin") {
    with_checkpoint(path.string(), [&](const auto& state) {
      report["kind"] = "checkpoint";
      report["value_bytes"] = checkpoint_value_bytes(path);
      report["step"] = state.step;
      report["describe"] = state.config.model.describe();
      report["parameters"] = state.model.parameter_count();
      for (const auto& [name, p] : state.model.parameters()) {
        report["tensors"].push_back(json{{"name", name}, {"shape", p.shape()}});
      }
      report["config"] = state.config.serialize();
    });
  } else if (path.extension() == ".json") {
    const Manifest m = read_manifest(path);
    report["kind"] = "manifest";
    for (const auto& f : m.files) report["files"].push_back(f.path);
    report["profiles"] = m.profiles.size();
    for (const auto& [tier, n] : m.tier_counts()) report["tier_counts"][std::string(to_string(tier))] = n;
  } else {
    const auto series = read_jsonl(path);
    report["kind"] = "series";
    report["count"] = series.size();
    std::size_t total = 0, shortest = series.empty() ? 0 : series.front().length(), longest = 0;
    for (const auto& s : series) {
      total += s.length();
      shortest = std::min(shortest, s.length());
      longest = std::max(longest, s.length());
    }
    report["values"] = total;
    report["min_length"] = shortest;
    report["max_length"] = longest;
  }
  write_file(out / "inspect.json", report.dump(2) + "\n");
  log << report.dump(2) << "\n";
}

}  // namespace

void run(const Invocation& inv, std::ostream& log) {
  KeyValues kv = inv.config_path ? KeyValues::load(*inv.config_path) : KeyValues{};
  for (const auto& o : inv.overrides) kv.apply_override(o);
  if (inv.seed) kv.set("seed", std::to_string(*inv.seed));
  const ResolvedConfig config = ResolvedConfig::resolve(kv, inv.ablations);
  const std::string resolved = config.to_kv().serialize();
  log << "[hiba] " << inv.verb << " resolved config:\n" << resolved;

  std::error_code ec;
  fs::create_directories(inv.out, ec);
  if (ec) throw FormatError("cannot create output directory '" + inv.out.string() + "': " + ec.message());
  write_file(inv.out / (inv.verb + ".config"), resolved);

  if (inv.verb == "synth") {
    cmd_synth(config, inv.out, log);
  } else if (inv.verb == "train") {
    cmd_train(config, inv.out, log);
  } else if (inv.verb == "forecast") {
    cmd_forecast(config, inv.out, log);
  } else if (inv.verb == "eval") {
    cmd_eval(config, inv.out, log);
  } else if (inv.verb == "bench") {
    cmd_bench(config, inv.out, log);
  } else if (inv.verb == "inspect") {
    cmd_inspect(config, inv.out, log);
  } else {
    throw ContractViolation("unknown verb '" + inv.verb + "'");
  }
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"hiba: time-series forecasting with hierarchical interleaved block attention"};
  app.require_subcommand(1);
  Invocation inv;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = inv.out.string();

  const std::pair<const char*, const char*> verbs[] = {
      {"synth", "Generate a synthetic corpus and its manifest"},
      {"train", "Train a model and write a checkpoint plus metrics log"},
      {"forecast", "Forecast series from a checkpoint"},
      {"eval", "Score a checkpoint (or seasonal naive) against seasonal naive"},
      {"bench", "Report attention pair counts and timing, HIBA vs dense"},
      {"inspect", "Describe a checkpoint, manifest or series file"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : verbs) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Key-value config file");
    sub->add_option("--seed", seed, "Seed for every random stream");
    sub->add_option("--set", inv.overrides, "Override a config key (key=value)")->take_all();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--ablate", inv.ablations, "Apply a model ablation")->take_all();
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitContract;
  }

  for (CLI::App* sub : subs) {
    if (!sub->parsed()) continue;
    inv.verb = sub->get_name();
    if (sub->count("--config")) inv.config_path = config_path;
    if (sub->count("--seed")) inv.seed = seed;
  }
  inv.out = out_dir;

  try {
    run(inv, err);
    return kExitOk;
  } catch (const FormatError& e) {
    err << "hiba: error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const fs::filesystem_error& e) {
    err << "hiba: error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const std::exception& e) {
    err << "hiba: error: " << e.what() << "\n";
    return kExitContract;
  }
}

}  // namespace hiba::cli
