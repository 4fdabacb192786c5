// SPDX-License-Identifier: Apache-2.0
#include "hiba/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

#include "hiba/errors.hpp"

namespace hiba {

using nlohmann::json;

Forecaster seasonal_naive_forecaster(std::span<const double> quantiles, std::size_t season) {
  std::vector<double> q(quantiles.begin(), quantiles.end());
  return [q, season](const Series& context, std::size_t horizon) {
    const std::size_t s = season ? season : season_for(context.frequency);
    const auto point = seasonal_naive(context.values, s, horizon);
    QuantileForecast f;
    f.horizon = horizon;
    f.head_horizon = horizon;
    f.quantiles = q;
    f.values.reserve(horizon * q.size());
    for (double v : point) f.values.insert(f.values.end(), q.size(), v);
    return f;
  };
}

std::size_t worker_count() {
  if (const char* env = std::getenv("HIBA_NUM_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

EvalRecord evaluate_one(const Series& series, const Forecaster& forecaster,
                        std::span<const double> quantiles, const EvalOptions& options) {
  const std::size_t h = options.horizon;
  require(series.length() >= h + 2, "evaluate: series '" + series.id + "' is shorter than horizon + 2");
  Series context = series;
  context.values.resize(series.length() - h);
  context.observed.resize(series.length() - h);
  const std::span<const double> targets(series.values.data() + context.length(), h);
  const std::size_t season = options.season ? options.season : season_for(series.frequency);

  const QuantileForecast f = forecaster(context, h);
  require(f.values.size() == h * quantiles.size(), "evaluate: forecast grid has the wrong size");
  const auto naive = seasonal_naive(context.values, season, h);
  std::vector<double> naive_grid;
  for (double v : naive) naive_grid.insert(naive_grid.end(), quantiles.size(), v);

  EvalRecord r;
  r.dataset_id = series.id;
  r.frequency = series.frequency;
  r.horizon = h;
  r.horizon_class = horizon_class(series.frequency, h);
  r.mase = mase(f.median(), targets, context.values, season);
  r.crps = crps_quantile(f.values, quantiles, targets);
  const double naive_mase = mase(naive, targets, context.values, season);
  const double naive_crps = crps_quantile(naive_grid, quantiles, targets);
  // Both sides floored: two perfect forecasts tie at 1 instead of 0 / eps.
  r.scaled_mase = std::max(r.mase, kMetricEpsilon) / std::max(naive_mase, kMetricEpsilon);
  r.scaled_crps = std::max(r.crps, kMetricEpsilon) / std::max(naive_crps, kMetricEpsilon);
  return r;
}

}  // namespace

std::vector<EvalRecord> evaluate(std::span<const Series> dataset, const Forecaster& forecaster,
                                 std::span<const double> quantiles, const EvalOptions& options) {
  require(!dataset.empty(), "evaluate: empty dataset");
  require(options.horizon >= 1, "evaluate: horizon must be >= 1");
  std::vector<EvalRecord> records(dataset.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto work = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) {
      try {
        records[i] = evaluate_one(dataset[i], forecaster, quantiles, options);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = dataset.size();
      }
    }
  };
  const std::size_t threads =
      std::min(dataset.size(), options.threads ? options.threads : worker_count());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  std::stable_sort(records.begin(), records.end(),
                   [](const EvalRecord& a, const EvalRecord& b) { return a.dataset_id < b.dataset_id; });
  return records;
}

std::string record_json(const EvalRecord& r) {
  return json{{"id", r.dataset_id},
              {"freq", std::string(to_string(r.frequency))},
              {"horizon", r.horizon},
              {"horizon_class", std::string(to_string(r.horizon_class))},
              {"mase", r.mase},
              {"crps", r.crps},
              {"scaled_mase", r.scaled_mase},
              {"scaled_crps", r.scaled_crps}}
      .dump();
}

std::string summary_json(const EvalSummary& s) {
  const auto score = [](const AggregateScore& a) {
    return json{{"scaled_mase", a.scaled_mase}, {"scaled_crps", a.scaled_crps}, {"count", a.count}};
  };
  json j;
  j["overall"] = score(s.overall);
  j["per_class"] = json::object();
  for (const auto& [cls, a] : s.per_class) j["per_class"][std::string(to_string(cls))] = score(a);
  return j.dump(2);
}

void write_report(const std::filesystem::path& records_path, const std::filesystem::path& summary_path,
                  std::span<const EvalRecord> records) {
  const EvalSummary summary = aggregate(records);
  const auto write = [](const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) {
      std::error_code ec;
      std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + p.string() + "' for writing");
    out << text;
    if (!out.flush()) throw FormatError("write to '" + p.string() + "' failed");
  };
  std::string lines;
  for (const auto& r : records) lines += record_json(r) + "\n";
  write(records_path, lines);
  write(summary_path, summary_json(summary) + "\n");
}

}  // namespace hiba
