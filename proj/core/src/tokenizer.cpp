// SPDX-License-Identifier: Apache-2.0
#include "hiba/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <utility>

#include "hiba/errors.hpp"

namespace hiba {

namespace {

struct FrequencyName {
  Frequency freq;
  std::string_view name;
};

constexpr std::array<FrequencyName, 9> kFrequencyNames{{
    {Frequency::secondly, "secondly"},
    {Frequency::minutely, "minutely"},
    {Frequency::hourly, "hourly"},
    {Frequency::daily, "daily"},
    {Frequency::weekly, "weekly"},
    {Frequency::monthly, "monthly"},
    {Frequency::quarterly, "quarterly"},
    {Frequency::yearly, "yearly"},
    {Frequency::none, "none"},
}};

}  // namespace

std::string_view to_string(Frequency f) {
  for (const auto& [freq, name] : kFrequencyNames) {
    if (freq == f) return name;
  }
  return "none";
}

Frequency parse_frequency(std::string_view text) {
  std::string s(text);
  for (const auto& [freq, name] : kFrequencyNames) {
    if (s == name) return freq;
  }
  std::string upper;
  for (char c : s) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (upper == "S" || upper == "10S" || upper == "SEC") return Frequency::secondly;
  if (upper == "T" || upper == "MIN" || upper == "5T" || upper == "10T" || upper == "15T")
    return Frequency::minutely;
  if (upper == "H" || upper == "HOUR") return Frequency::hourly;
  if (upper == "D" || upper == "B" || upper == "DAY") return Frequency::daily;
  if (upper.starts_with("W")) return Frequency::weekly;
  if (upper == "M" || upper == "MS" || upper == "ME") return Frequency::monthly;
  if (upper.starts_with("Q")) return Frequency::quarterly;
  if (upper == "A" || upper == "Y" || upper.starts_with("A-") || upper.starts_with("Y-") ||
      upper == "YS" || upper == "YE")
    return Frequency::yearly;
  if (upper.empty() || upper == "NONE") return Frequency::none;
  throw ContractViolation("unknown frequency tag '" + s + "'");
}

Series make_series(std::string id, std::vector<double> values, std::vector<std::uint8_t> observed,
                   Frequency frequency) {
  require(!values.empty(), "series '" + id + "': needs at least one value");
  if (observed.empty()) observed.assign(values.size(), 1);
  require(observed.size() == values.size(),
          "series '" + id + "': observed mask length differs from values");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!observed[i]) {
      values[i] = 0.0;
    } else {
      observed[i] = 1;
      require(std::isfinite(values[i]), "series '" + id + "': non-finite observed value");
    }
  }
  return Series{std::move(id), std::move(values), std::move(observed), frequency};
}

Normalized instance_normalize(std::span<const double> values,
                              std::span<const std::uint8_t> observed) {
  require(!values.empty(), "instance_normalize: empty series");
  require(observed.size() == values.size(), "instance_normalize: mask length mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (observed[i]) {
      sum += values[i];
      ++count;
    }
  }
  Normalized out;
  out.mu = count ? sum / static_cast<double>(count) : 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (observed[i]) ss += (values[i] - out.mu) * (values[i] - out.mu);
  }
  const double sd = count ? std::sqrt(ss / static_cast<double>(count)) : 0.0;
  out.sigma = std::max(sd, kNormEpsilon);
  out.values.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.values[i] = observed[i] ? (values[i] - out.mu) / out.sigma : 0.0;
  }
  return out;
}

Normalized instance_normalize(const Series& series) {
  return instance_normalize(series.values, series.observed);
}

PatchedInput patch(std::span<const double> normalized, std::span<const std::uint8_t> observed,
                   std::size_t patch_size) {
  require(patch_size >= 1, "patch: patch size must be >= 1");
  require(observed.size() == normalized.size(), "patch: mask length mismatch");
  const std::size_t t = normalized.size();
  PatchedInput out;
  out.patch_size = patch_size;
  out.n = (t + patch_size - 1) / patch_size;
  out.pad_len = out.n * patch_size - t;
  out.patches.assign(out.n * patch_size, 0.0);
  out.mask.assign(out.n * patch_size, 1);
  for (std::size_t i = 0; i < t; ++i) {
    const std::size_t slot = out.pad_len + i;
    out.patches[slot] = observed[i] ? normalized[i] : 0.0;
    out.mask[slot] = observed[i] ? 0 : 1;
  }
  return out;
}

PatchedInput pad_tokens(PatchedInput input, std::size_t multiple, std::size_t min_tokens) {
  require(multiple >= 1, "pad_tokens: multiple must be >= 1");
  std::size_t target = std::max(input.n, min_tokens);
  target = (target + multiple - 1) / multiple * multiple;
  if (target == input.n) return input;
  const std::size_t extra = (target - input.n) * input.patch_size;
  input.patches.insert(input.patches.begin(), extra, 0.0);
  input.mask.insert(input.mask.begin(), extra, 1);
  input.pad_len += extra;
  input.n = target;
  return input;
}

PatchedInput tokenize(const Series& series, std::size_t patch_size, std::size_t token_multiple,
                      std::size_t min_tokens) {
  Normalized norm = instance_normalize(series);
  PatchedInput p = patch(norm.values, series.observed, patch_size);
  p.mu = norm.mu;
  p.sigma = norm.sigma;
  return pad_tokens(std::move(p), token_multiple, min_tokens);
}

template <typename T>
ad::Tensor<T> embed_features(std::span<const PatchedInput> inputs) {
  require(!inputs.empty(), "embed_features: no inputs");
  const std::size_t p = inputs[0].patch_size;
  std::size_t rows = 0;
  for (const auto& in : inputs) {
    require(in.patch_size == p, "embed_features: mixed patch sizes");
    rows += in.n;
  }
  std::vector<T> data(rows * 2 * p);
  std::size_t r = 0;
  for (const auto& in : inputs) {
    for (std::size_t i = 0; i < in.n; ++i, ++r) {
      T* row = data.data() + r * 2 * p;
      for (std::size_t j = 0; j < p; ++j) {
        row[j] = static_cast<T>(in.patches[i * p + j]);
        row[p + j] = static_cast<T>(in.mask[i * p + j]);
      }
    }
  }
  return ad::Tensor<T>::from({rows, 2 * p}, std::move(data));
}

template <typename T>
EmbedParams<T> EmbedParams<T>::init(CounterRng& rng, std::size_t patch_size, std::size_t hidden,
                                    std::size_t d_model) {
  EmbedParams e;
  e.mlp.hidden = nn::Linear<T>::init(rng, 2 * patch_size, hidden, true);
  e.mlp.output = nn::Linear<T>::init(rng, hidden, d_model, true);
  return e;
}

template <typename T>
ad::Tensor<T> embed(const ad::Tensor<T>& features, const EmbedParams<T>& params) {
  require(features.rank() == 2 && features.dim(1) == params.mlp.hidden.weight.dim(0),
          "embed: features " + ad::to_string(features.shape()) + " do not match input width " +
              std::to_string(params.mlp.hidden.weight.dim(0)));
  return params.mlp(features);
}

template <typename T>
ad::Tensor<T> embed(const PatchedInput& input, const EmbedParams<T>& params) {
  return embed(embed_features<T>(std::span<const PatchedInput>(&input, 1)), params);
}

template ad::Tensor<float> embed_features<float>(std::span<const PatchedInput>);
template ad::Tensor<double> embed_features<double>(std::span<const PatchedInput>);
template struct EmbedParams<float>;
template struct EmbedParams<double>;
template ad::Tensor<float> embed(const ad::Tensor<float>&, const EmbedParams<float>&);
template ad::Tensor<double> embed(const ad::Tensor<double>&, const EmbedParams<double>&);
template ad::Tensor<float> embed(const PatchedInput&, const EmbedParams<float>&);
template ad::Tensor<double> embed(const PatchedInput&, const EmbedParams<double>&);

}  // namespace hiba
