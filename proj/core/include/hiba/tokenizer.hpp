// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hiba/nn.hpp"
#include "hiba/tensor.hpp"

namespace hiba {

enum class Frequency { secondly, minutely, hourly, daily, weekly, monthly, quarterly, yearly, none };

std::string_view to_string(Frequency f);
/// Accepts the enum names and the usual pandas-style aliases ("H", "D", "W", "M", ...).
Frequency parse_frequency(std::string_view text);

/// One univariate series. Missing positions hold 0 (`observed[i] == 0`).
struct Series {
  std::string id;
  std::vector<double> values;
  std::vector<std::uint8_t> observed;
  Frequency frequency = Frequency::none;

  [[nodiscard]] std::size_t length() const { return values.size(); }
};

/// Validates lengths (T >= 1) and zero-fills missing values. An empty
/// `observed` means fully observed.
Series make_series(std::string id, std::vector<double> values,
                   std::vector<std::uint8_t> observed = {}, Frequency frequency = Frequency::none);

inline constexpr double kNormEpsilon = 1e-5;

struct Normalized {
  std::vector<double> values;
  double mu = 0.0;
  double sigma = 1.0;  // already floored at kNormEpsilon
};

/// (x - mu) / max(sigma, eps) with population statistics over observed
/// positions only; missing positions become 0.
Normalized instance_normalize(std::span<const double> values, std::span<const std::uint8_t> observed);
Normalized instance_normalize(const Series& series);

inline double denormalize(double y, double mu, double sigma) { return sigma * y + mu; }

/// Non-overlapping patches, left-padded so the last value sits in the last
/// slot of the last patch. mask = 1 on padding or missing values.
struct PatchedInput {
  std::size_t patch_size = 0;
  std::size_t n = 0;        // patch count
  std::size_t pad_len = 0;  // leading padded slots
  std::vector<double> patches;
  std::vector<std::uint8_t> mask;
  double mu = 0.0;
  double sigma = 1.0;

  [[nodiscard]] std::size_t series_length() const { return n * patch_size - pad_len; }
  /// True if every slot of patch `i` is left padding.
  [[nodiscard]] bool is_pad_patch(std::size_t i) const { return (i + 1) * patch_size <= pad_len; }
};

PatchedInput patch(std::span<const double> normalized, std::span<const std::uint8_t> observed,
                   std::size_t patch_size);

/// Prepends fully padded patches until `n` is a multiple of `multiple` and at
/// least `min_tokens`.
PatchedInput pad_tokens(PatchedInput input, std::size_t multiple, std::size_t min_tokens = 0);

/// normalize -> patch -> pad_tokens.
PatchedInput tokenize(const Series& series, std::size_t patch_size, std::size_t token_multiple,
                      std::size_t min_tokens = 0);

/// Embedding input rows: concat(patch_i, mask_i), shape [sum(n), 2P].
template <typename T>
ad::Tensor<T> embed_features(std::span<const PatchedInput> inputs);

/// InputEmbed: two-layer SiLU MLP, 2P -> hidden -> d.
template <typename T>
struct EmbedParams {
  nn::Mlp<T> mlp;

  static EmbedParams init(CounterRng& rng, std::size_t patch_size, std::size_t hidden,
                          std::size_t d_model);
  void collect(const std::string& prefix, nn::ParamList<T>& out) const {
    mlp.collect(prefix, out);
  }
};

/// Token embeddings [rows, d] from embedding features [rows, 2P]. Row-local.
template <typename T>
ad::Tensor<T> embed(const ad::Tensor<T>& features, const EmbedParams<T>& params);

/// Token embeddings [n, d] for one tokenized series.
template <typename T>
ad::Tensor<T> embed(const PatchedInput& input, const EmbedParams<T>& params);

}  // namespace hiba
