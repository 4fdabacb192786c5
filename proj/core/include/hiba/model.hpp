// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hiba/config.hpp"
#include "hiba/hiba_block.hpp"
#include "hiba/prediction.hpp"
#include "hiba/tokenizer.hpp"

namespace hiba {

/// Full hyperparameter record, including ablation toggles.
struct ModelConfig {
  std::size_t patch_size = 8;
  std::size_t context_length = 2688;
  std::size_t d_model = 160;
  std::size_t d_ff = 640;
  std::size_t embed_hidden = 0;  // 0 selects 4 * d_model
  std::size_t num_layers = 24;
  std::vector<std::size_t> block_sizes{3, 7, 21};
  std::size_t heads_q = 10;
  std::size_t heads_kv = 2;
  std::vector<std::size_t> horizons{96, 768};
  std::vector<double> quantiles = default_quantiles();
  double rope_base = 10000.0;

  // Ablations.
  bool standard_attention = false;
  bool causal_intra = false;
  bool prenorm = false;
  std::size_t uniform_block_size = 0;  // 0 = use block_sizes
  std::vector<std::size_t> head_set;   // horizons trained/served; empty = all

  /// Smallest published configuration (patch 8, context 2688, d 160/640, 24 layers, (10, 2) heads).
  static ModelConfig tiny();
  /// Minutes-scale configuration used by tests and the default CLI run.
  static ModelConfig desk();

  [[nodiscard]] BlockSchedule schedule() const;
  [[nodiscard]] std::size_t embed_width() const { return embed_hidden ? embed_hidden : 4 * d_model; }
  /// Token count after patching the full context and aligning to the schedule.
  [[nodiscard]] std::size_t tokens() const;
  [[nodiscard]] BlockToggles toggles() const;
  /// Indices into `horizons` of the heads in use.
  [[nodiscard]] std::vector<std::size_t> active_heads() const;
  void validate() const;

  /// Reads `prefix`-qualified keys (e.g. "model.d_model") over the defaults in `base`.
  static ModelConfig from_kv(const KeyValues& kv, const std::string& prefix, ModelConfig base);
  void to_kv(KeyValues& kv, const std::string& prefix) const;
  /// One-line architecture description for logs.
  [[nodiscard]] std::string describe() const;
};

/// Applies a named ablation ("standard_attention", "causal_intra",
/// "uniform_block_size[=B]", "single_head[=H]", "prenorm").
void apply_ablation(ModelConfig& config, std::string_view name);

/// Embedding, HIBA stack and prediction heads.
template <typename T>
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] nn::ParamList<T> parameters() const;
  [[nodiscard]] std::size_t parameter_count() const;

  /// Crops to the last context_length values and tokenizes to config().tokens().
  [[nodiscard]] PatchedInput prepare(const Series& context) const;

  /// Final hidden states [batch * tokens, d] for same-length inputs.
  [[nodiscard]] ad::Tensor<T> encode(std::span<const PatchedInput> inputs,
                                     PairCounter* counter = nullptr) const;

  /// Training objective over the active heads, every non-pad patch position.
  [[nodiscard]] ad::Tensor<T> loss(std::span<const PatchedInput> inputs,
                                   std::span<const TargetTimeline> timelines) const;

  /// Head index serving `horizon`: smallest active H_k >= horizon.
  [[nodiscard]] std::size_t route_horizon(std::size_t horizon) const;

  /// Forecast from the last patch position.
  [[nodiscard]] QuantileForecast forecast(const Series& context, std::size_t horizon) const;

  EmbedParams<T> embedding;
  std::vector<HibaParams<T>> layers;
  HeadParams<T> heads;

 private:
  ModelConfig config_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace hiba
