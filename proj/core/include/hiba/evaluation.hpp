// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hiba/metrics.hpp"
#include "hiba/prediction.hpp"
#include "hiba/tokenizer.hpp"

namespace hiba {

/// Produces a forecast of `horizon` steps from a context series.
using Forecaster = std::function<QuantileForecast(const Series& context, std::size_t horizon)>;

/// Point forecaster that repeats the last season; every quantile equals the point value.
Forecaster seasonal_naive_forecaster(std::span<const double> quantiles, std::size_t season = 0);

struct EvalOptions {
  std::size_t horizon = 24;
  std::size_t season = 0;   // 0 = derive from the frequency tag
  std::size_t threads = 0;  // 0 = worker_count()
};

/// Worker pool size: HIBA_NUM_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Splits the last `horizon` values off each series as targets, forecasts from
/// the rest and scores against the seasonal naive baseline. Records are ordered
/// by series id. Throws ContractViolation on an empty dataset or series too
/// short to leave two context values.
std::vector<EvalRecord> evaluate(std::span<const Series> dataset, const Forecaster& forecaster,
                                 std::span<const double> quantiles, const EvalOptions& options);

std::string record_json(const EvalRecord& record);
std::string summary_json(const EvalSummary& summary);

/// Writes records as JSON lines and the summary as JSON.
void write_report(const std::filesystem::path& records_path, const std::filesystem::path& summary_path,
                  std::span<const EvalRecord> records);

}  // namespace hiba
