// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hiba/tokenizer.hpp"

namespace hiba {

inline constexpr double kMetricEpsilon = 1e-8;

/// Conventional season length per frequency tag.
std::size_t season_for(Frequency f);

/// y_hat[t] = y[T - s + ((t - 1) mod s)] for t = 1..horizon. Falls back to
/// s = 1 when the context is shorter than the season.
std::vector<double> seasonal_naive(std::span<const double> context, std::size_t season,
                                   std::size_t horizon);

/// In-sample MAE of the lag-s naive forecaster (lag 1 if the context is too
/// short for lag s), floored at kMetricEpsilon.
double naive_scale(std::span<const double> context, std::size_t season);

double mase(std::span<const double> forecast, std::span<const double> targets,
            std::span<const double> context, std::size_t season);

/// (2 / (H |Q|)) sum_{t,q} pinball_q(x_t, grid[t, q]) / max(mean |x_t|, eps).
/// grid is row-major [H, |Q|].
double crps_quantile(std::span<const double> grid, std::span<const double> quantiles,
                     std::span<const double> targets);

enum class HorizonClass { short_term, medium_term, long_term };
std::string_view to_string(HorizonClass c);

/// Short up to the frequency's base horizon, medium up to 10x, long beyond.
HorizonClass horizon_class(Frequency f, std::size_t horizon);
std::size_t base_horizon(Frequency f);

struct EvalRecord {
  std::string dataset_id;
  Frequency frequency = Frequency::none;
  HorizonClass horizon_class = HorizonClass::short_term;
  std::size_t horizon = 0;
  double mase = 0.0;
  double crps = 0.0;
  double scaled_mase = 1.0;  // vs. seasonal naive
  double scaled_crps = 1.0;
};

struct AggregateScore {
  double scaled_mase = 1.0;
  double scaled_crps = 1.0;
  std::size_t count = 0;
};

struct EvalSummary {
  AggregateScore overall;
  std::map<HorizonClass, AggregateScore> per_class;  // only classes present
};

/// Throws ContractViolation on empty input or non-positive values.
double geometric_mean(std::span<const double> values);

EvalSummary aggregate(std::span<const EvalRecord> records);

}  // namespace hiba
