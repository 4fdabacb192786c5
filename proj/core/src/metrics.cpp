// SPDX-License-Identifier: Apache-2.0
#include "hiba/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "hiba/errors.hpp"
#include "hiba/prediction.hpp"

namespace hiba {

std::size_t season_for(Frequency f) {
  switch (f) {
    case Frequency::secondly: return 60;
    case Frequency::minutely: return 60;
    case Frequency::hourly: return 24;
    case Frequency::daily: return 7;
    case Frequency::weekly: return 52;
    case Frequency::monthly: return 12;
    case Frequency::quarterly: return 4;
    case Frequency::yearly: return 1;
    case Frequency::none: return 1;
  }
  return 1;
}

std::vector<double> seasonal_naive(std::span<const double> context, std::size_t season,
                                   std::size_t horizon) {
  require(!context.empty(), "seasonal_naive: empty context");
  require(season >= 1, "seasonal_naive: season must be >= 1");
  const std::size_t t = context.size();
  const std::size_t s = t >= season ? season : 1;
  std::vector<double> out(horizon);
  for (std::size_t h = 1; h <= horizon; ++h) out[h - 1] = context[t - s + (h - 1) % s];
  return out;
}

double naive_scale(std::span<const double> context, std::size_t season) {
  require(season >= 1, "mase: season must be >= 1");
  const std::size_t s = context.size() > season ? season : 1;
  if (context.size() <= s) return kMetricEpsilon;
  double sum = 0.0;
  for (std::size_t t = s; t < context.size(); ++t) sum += std::abs(context[t] - context[t - s]);
  return std::max(sum / static_cast<double>(context.size() - s), kMetricEpsilon);
}

double mase(std::span<const double> forecast, std::span<const double> targets,
            std::span<const double> context, std::size_t season) {
  require(!targets.empty() && forecast.size() == targets.size(),
          "mase: forecast and targets must be non-empty and of equal length");
  double sum = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) sum += std::abs(forecast[t] - targets[t]);
  return sum / static_cast<double>(targets.size()) / naive_scale(context, season);
}

double crps_quantile(std::span<const double> grid, std::span<const double> quantiles,
                     std::span<const double> targets) {
  const std::size_t h = targets.size();
  const std::size_t nq = quantiles.size();
  require(h >= 1 && nq >= 1, "crps: need at least one target and one quantile");
  require(grid.size() == h * nq, "crps: grid must be [H, |Q|]");
  double loss = 0.0;
  double scale = 0.0;
  for (std::size_t t = 0; t < h; ++t) {
    for (std::size_t q = 0; q < nq; ++q) loss += pinball(quantiles[q], targets[t], grid[t * nq + q]);
    scale += std::abs(targets[t]);
  }
  const auto hq = static_cast<double>(h * nq);
  return 2.0 * loss / hq / std::max(scale / static_cast<double>(h), kMetricEpsilon);
}

std::string_view to_string(HorizonClass c) {
  switch (c) {
    case HorizonClass::short_term: return "short";
    case HorizonClass::medium_term: return "medium";
    case HorizonClass::long_term: return "long";
  }
  return "short";
}

std::size_t base_horizon(Frequency f) {
  switch (f) {
    case Frequency::secondly: return 60;
    case Frequency::minutely: return 48;
    case Frequency::hourly: return 48;
    case Frequency::daily: return 30;
    case Frequency::weekly: return 8;
    case Frequency::monthly: return 12;
    case Frequency::quarterly: return 8;
    case Frequency::yearly: return 6;
    case Frequency::none: return 48;
  }
  return 48;
}

HorizonClass horizon_class(Frequency f, std::size_t horizon) {
  const std::size_t base = base_horizon(f);
  if (horizon <= base) return HorizonClass::short_term;
  if (horizon <= 10 * base) return HorizonClass::medium_term;
  return HorizonClass::long_term;
}

double geometric_mean(std::span<const double> values) {
  require(!values.empty(), "geometric_mean: no values");
  double log_sum = 0.0;
  for (double v : values) {
    require(v > 0.0 && std::isfinite(v), "geometric_mean: values must be positive and finite");
    log_sum += std::log(v);
  }
  return std::exp(log_sum / static_cast<double>(values.size()));
}

namespace {

AggregateScore score(std::span<const EvalRecord* const> records) {
  std::vector<double> m, c;
  for (const auto* r : records) {
    m.push_back(r->scaled_mase);
    c.push_back(r->scaled_crps);
  }
  return AggregateScore{geometric_mean(m), geometric_mean(c), records.size()};
}

}  // namespace

EvalSummary aggregate(std::span<const EvalRecord> records) {
  require(!records.empty(), "aggregate: no records");
  std::vector<const EvalRecord*> all;
  std::map<HorizonClass, std::vector<const EvalRecord*>> by_class;
  for (const auto& r : records) {
    all.push_back(&r);
    by_class[r.horizon_class].push_back(&r);
  }
  EvalSummary s;
  s.overall = score(all);
  for (const auto& [cls, rs] : by_class) s.per_class[cls] = score(rs);
  return s;
}

}  // namespace hiba
