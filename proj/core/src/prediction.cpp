// SPDX-License-Identifier: Apache-2.0
#include "hiba/prediction.hpp"

#include <algorithm>
#include <cmath>

#include "hiba/errors.hpp"

namespace hiba {

std::vector<double> default_quantiles() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

void validate_heads(std::span<const std::size_t> horizons, std::span<const double> quantiles) {
  require(!horizons.empty(), "heads: at least one horizon required");
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    require(horizons[i] >= 1, "heads: horizons must be >= 1");
    require(i == 0 || horizons[i - 1] < horizons[i], "heads: horizons must be strictly increasing");
  }
  require(!quantiles.empty(), "heads: at least one quantile level required");
  for (std::size_t i = 0; i < quantiles.size(); ++i) {
    require(quantiles[i] > 0.0 && quantiles[i] < 1.0, "heads: quantile levels must be in (0, 1)");
    require(i == 0 || quantiles[i - 1] < quantiles[i],
            "heads: quantile levels must be strictly increasing");
  }
}

template <typename T>
HeadParams<T> HeadParams<T>::init(CounterRng& rng, std::size_t d_model,
                                  std::vector<std::size_t> horizons,
                                  std::vector<double> quantiles) {
  validate_heads(horizons, quantiles);
  HeadParams p;
  for (const auto h : horizons) {
    nn::Mlp<T> mlp;
    mlp.hidden = nn::Linear<T>::init(rng, d_model, d_model, true);
    mlp.output = nn::Linear<T>::init(rng, d_model, h * quantiles.size(), true);
    p.heads.push_back(std::move(mlp));
  }
  p.horizons = std::move(horizons);
  p.quantiles = std::move(quantiles);
  return p;
}

template <typename T>
void HeadParams<T>::collect(const std::string& prefix, nn::ParamList<T>& out) const {
  for (std::size_t k = 0; k < heads.size(); ++k) {
    heads[k].collect(prefix + "." + std::to_string(horizons[k]), out);
  }
}

template <typename T>
ad::Tensor<T> head_output(const ad::Tensor<T>& hidden, const HeadParams<T>& heads, std::size_t k) {
  require(k < heads.size(), "head_output: head index out of range");
  return heads.heads[k](hidden);
}

void repair_monotone(std::span<double> values, std::size_t num_quantiles) {
  require(num_quantiles >= 1 && values.size() % num_quantiles == 0,
          "repair_monotone: grid size not divisible by quantile count");
  for (std::size_t off = 0; off < values.size(); off += num_quantiles) {
    std::sort(values.begin() + static_cast<long>(off),
              values.begin() + static_cast<long>(off + num_quantiles));
  }
}

std::size_t QuantileForecast::median_index() const {
  for (std::size_t q = 0; q < quantiles.size(); ++q) {
    if (std::abs(quantiles[q] - 0.5) < 1e-12) return q;
  }
  return quantiles.size() / 2;
}

std::vector<double> QuantileForecast::median() const {
  const std::size_t m = median_index();
  std::vector<double> out(horizon);
  for (std::size_t t = 0; t < horizon; ++t) out[t] = at(t, m);
  return out;
}

QuantileForecast make_forecast(std::span<const double> raw_row, std::size_t head_horizon,
                               std::size_t horizon, std::span<const double> quantiles, double mu,
                               double sigma, std::size_t origin_index) {
  const std::size_t nq = quantiles.size();
  require(raw_row.size() == head_horizon * nq, "make_forecast: raw row has wrong width");
  require(horizon >= 1 && horizon <= head_horizon,
          "make_forecast: horizon " + std::to_string(horizon) + " exceeds head horizon " +
              std::to_string(head_horizon));
  QuantileForecast f;
  f.horizon = horizon;
  f.head_horizon = head_horizon;
  f.quantiles.assign(quantiles.begin(), quantiles.end());
  f.origin_index = origin_index;
  f.mu = mu;
  f.sigma = sigma;
  f.values.resize(horizon * nq);
  for (std::size_t i = 0; i < horizon * nq; ++i) f.values[i] = denormalize(raw_row[i], mu, sigma);
  repair_monotone(f.values, nq);
  return f;
}

template <typename T>
std::vector<std::vector<QuantileForecast>> predict(const ad::Tensor<T>& hidden,
                                                   const HeadParams<T>& heads, double mu,
                                                   double sigma) {
  require(hidden.rank() == 2, "predict: expected [n, d]");
  std::vector<std::vector<QuantileForecast>> out;
  for (std::size_t k = 0; k < heads.size(); ++k) {
    const auto raw = head_output(hidden, heads, k);
    const std::size_t width = raw.dim(1);
    std::vector<QuantileForecast> per_pos;
    std::vector<double> row(width);
    for (std::size_t i = 0; i < raw.dim(0); ++i) {
      for (std::size_t c = 0; c < width; ++c) row[c] = static_cast<double>(raw.data()[i * width + c]);
      per_pos.push_back(make_forecast(row, heads.horizons[k], heads.horizons[k], heads.quantiles,
                                      mu, sigma, i));
    }
    out.push_back(std::move(per_pos));
  }
  return out;
}

template <typename T>
ad::Tensor<T> quantile_loss(const ad::Tensor<T>& pred, std::span<const double> targets,
                            std::span<const std::uint8_t> valid, std::span<const double> quantiles) {
  const std::size_t nq = quantiles.size();
  require(pred.rank() == 2 && nq > 0 && pred.dim(1) % nq == 0,
          "quantile_loss: prediction width must be H * |Q|");
  const std::size_t rows = pred.dim(0), horizon = pred.dim(1) / nq;
  require(targets.size() == rows * horizon && valid.size() == rows * horizon,
          "quantile_loss: targets must be [rows, H]");
  std::size_t count = 0;
  for (const auto v : valid) count += v ? 1 : 0;
  require(count > 0, "quantile_loss: no valid targets");
  const double norm = 1.0 / static_cast<double>(count * nq);

  const T* p = pred.data().data();
  double total = 0.0;
  for (std::size_t r = 0; r < rows * horizon; ++r) {
    if (!valid[r]) continue;
    for (std::size_t q = 0; q < nq; ++q) {
      total += pinball(quantiles[q], targets[r], static_cast<double>(p[r * nq + q]));
    }
  }
  std::vector<double> tgt(targets.begin(), targets.end());
  std::vector<std::uint8_t> mask(valid.begin(), valid.end());
  std::vector<double> qs(quantiles.begin(), quantiles.end());
  return ad::make_result<T>(
      ad::Shape{}, std::vector<T>{static_cast<T>(total * norm)}, "quantile_loss", {pred},
      [tgt = std::move(tgt), mask = std::move(mask), qs = std::move(qs), norm](ad::Node<T>& self) {
        auto& g = self.inputs[0]->ensure_grad();
        const T* p = self.inputs[0]->data.data();
        const double up = static_cast<double>(self.grad[0]) * norm;
        const std::size_t nq = qs.size();
        for (std::size_t r = 0; r < tgt.size(); ++r) {
          if (!mask[r]) continue;
          for (std::size_t q = 0; q < nq; ++q) {
            const double d = static_cast<double>(p[r * nq + q]) <= tgt[r] ? -qs[q] : 1.0 - qs[q];
            g[r * nq + q] += static_cast<T>(up * d);
          }
        }
      });
}

template <typename T>
ad::Tensor<T> total_loss(std::span<const ad::Tensor<T>> head_losses) {
  require(!head_losses.empty(), "total_loss: at least one head loss required");
  ad::Tensor<T> acc = head_losses[0];
  for (std::size_t k = 1; k < head_losses.size(); ++k) acc = ad::add(acc, head_losses[k]);
  if (head_losses.size() == 1) return acc;
  return ad::scale(acc, T(1) / static_cast<T>(head_losses.size()));
}

TargetTimeline make_timeline(const PatchedInput& input, std::span<const double> future,
                             std::span<const std::uint8_t> future_observed) {
  require(future.size() == future_observed.size(), "make_timeline: future mask length mismatch");
  TargetTimeline tl;
  tl.patch_size = input.patch_size;
  tl.tokens = input.n;
  const std::size_t ctx = input.n * input.patch_size;
  tl.values.resize(ctx + future.size());
  tl.valid.resize(ctx + future.size());
  for (std::size_t u = 0; u < ctx; ++u) {
    tl.values[u] = input.patches[u];
    tl.valid[u] = input.mask[u] ? 0 : 1;
  }
  for (std::size_t f = 0; f < future.size(); ++f) {
    tl.valid[ctx + f] = future_observed[f] ? 1 : 0;
    tl.values[ctx + f] = future_observed[f] ? (future[f] - input.mu) / input.sigma : 0.0;
  }
  tl.pad_patch.resize(input.n);
  for (std::size_t i = 0; i < input.n; ++i) tl.pad_patch[i] = input.is_pad_patch(i) ? 1 : 0;
  return tl;
}

void append_head_targets(const TargetTimeline& timeline, std::size_t horizon,
                         std::vector<double>& targets, std::vector<std::uint8_t>& valid) {
  const std::size_t p = timeline.patch_size;
  for (std::size_t i = 0; i < timeline.tokens; ++i) {
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::size_t u = (i + 1) * p + t;
      const bool ok = !timeline.pad_patch[i] && u < timeline.values.size() && timeline.valid[u];
      targets.push_back(ok ? timeline.values[u] : 0.0);
      valid.push_back(ok ? 1 : 0);
    }
  }
}

template struct HeadParams<float>;
template struct HeadParams<double>;
template ad::Tensor<float> head_output(const ad::Tensor<float>&, const HeadParams<float>&,
                                       std::size_t);
template ad::Tensor<double> head_output(const ad::Tensor<double>&, const HeadParams<double>&,
                                        std::size_t);
template std::vector<std::vector<QuantileForecast>> predict(const ad::Tensor<float>&,
                                                            const HeadParams<float>&, double,
                                                            double);
template std::vector<std::vector<QuantileForecast>> predict(const ad::Tensor<double>&,
                                                            const HeadParams<double>&, double,
                                                            double);
template ad::Tensor<float> quantile_loss(const ad::Tensor<float>&, std::span<const double>,
                                         std::span<const std::uint8_t>, std::span<const double>);
template ad::Tensor<double> quantile_loss(const ad::Tensor<double>&, std::span<const double>,
                                          std::span<const std::uint8_t>, std::span<const double>);
template ad::Tensor<float> total_loss(std::span<const ad::Tensor<float>>);
template ad::Tensor<double> total_loss(std::span<const ad::Tensor<double>>);

}  // namespace hiba
