// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hiba/nn.hpp"
#include "hiba/tensor.hpp"
#include "hiba/tokenizer.hpp"

namespace hiba {

std::vector<double> default_quantiles();

/// One two-layer SiLU MLP per horizon, d -> d -> H_k * |Q|. Output channel
/// t * |Q| + q is step t+1 at quantile level q.
template <typename T>
struct HeadParams {
  std::vector<std::size_t> horizons;
  std::vector<double> quantiles;
  std::vector<nn::Mlp<T>> heads;

  static HeadParams init(CounterRng& rng, std::size_t d_model, std::vector<std::size_t> horizons,
                         std::vector<double> quantiles);
  [[nodiscard]] std::size_t size() const { return heads.size(); }
  void collect(const std::string& prefix, nn::ParamList<T>& out) const;
};

/// Checks strictly increasing horizons and quantile levels in (0, 1).
void validate_heads(std::span<const std::size_t> horizons, std::span<const double> quantiles);

/// Raw normalized-space outputs of head k: [rows, H_k * |Q|].
template <typename T>
ad::Tensor<T> head_output(const ad::Tensor<T>& hidden, const HeadParams<T>& heads, std::size_t k);

/// Sorts each timestep's quantile vector ascending.
void repair_monotone(std::span<double> values, std::size_t num_quantiles);

/// Denormalized forecast grid [horizon, |Q|].
struct QuantileForecast {
  std::size_t horizon = 0;
  std::size_t head_horizon = 0;  // H_k of the head that served it
  std::vector<double> quantiles;
  std::vector<double> values;
  std::size_t origin_index = 0;  // patch position the forecast was issued from
  double mu = 0.0;
  double sigma = 1.0;

  [[nodiscard]] double at(std::size_t t, std::size_t q) const {
    return values[t * quantiles.size() + q];
  }
  /// Median path (level 0.5 if present, else the middle level).
  [[nodiscard]] std::vector<double> median() const;
  [[nodiscard]] std::size_t median_index() const;
};

/// Denormalizes and repairs one raw head row into a forecast truncated to `horizon`.
QuantileForecast make_forecast(std::span<const double> raw_row, std::size_t head_horizon,
                               std::size_t horizon, std::span<const double> quantiles, double mu,
                               double sigma, std::size_t origin_index);

/// Forecasts from every patch position and every head: result[k][i].
template <typename T>
std::vector<std::vector<QuantileForecast>> predict(const ad::Tensor<T>& hidden,
                                                   const HeadParams<T>& heads, double mu,
                                                   double sigma);

/// Mean pinball loss over valid (i, t, q) terms, in normalized space.
/// pred: [rows, H * |Q|]; targets/valid: [rows, H]. Throws if nothing is valid.
template <typename T>
ad::Tensor<T> quantile_loss(const ad::Tensor<T>& pred, std::span<const double> targets,
                            std::span<const std::uint8_t> valid, std::span<const double> quantiles);

/// Mean of per-head losses.
template <typename T>
ad::Tensor<T> total_loss(std::span<const ad::Tensor<T>> head_losses);

/// Pinball term: q (x - xhat) if xhat <= x else (1 - q)(xhat - x).
inline double pinball(double q, double target, double forecast) {
  return forecast <= target ? q * (target - forecast) : (1.0 - q) * (forecast - target);
}

/// Normalized values and validity on the padded timeline of one sample:
/// coordinates [0, n*P) are the padded context, [n*P, n*P + future) follow it.
struct TargetTimeline {
  std::size_t patch_size = 0;
  std::size_t tokens = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;
  std::vector<std::uint8_t> pad_patch;  // per token: fully left padding
};

TargetTimeline make_timeline(const PatchedInput& input, std::span<const double> future,
                             std::span<const std::uint8_t> future_observed);

/// Targets for a head of horizon H: patch i predicts timeline[(i+1)P + t].
/// Appends [tokens, H] rows; predictions from pad patches are invalid.
void append_head_targets(const TargetTimeline& timeline, std::size_t horizon,
                         std::vector<double>& targets, std::vector<std::uint8_t>& valid);

}  // namespace hiba
