// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hiba/attention.hpp"
#include "hiba/nn.hpp"

namespace hiba {

/// Block sizes per HIBA block, cycling a base pattern: layer l uses
/// sizes[l % sizes.size()].
struct BlockSchedule {
  std::vector<std::size_t> sizes{3, 7, 21};

  [[nodiscard]] std::size_t size_for_layer(std::size_t layer) const;
  /// Least common multiple of all sizes; token counts must be a multiple.
  [[nodiscard]] std::size_t lcm() const;
  [[nodiscard]] std::size_t num_blocks(std::size_t n, std::size_t layer) const;
  void validate() const;
};

/// GLU feed-forward: down(silu(gate(x)) * up(x)).
template <typename T>
struct FfnParams {
  nn::Linear<T> gate, up, down;

  static FfnParams init(CounterRng& rng, std::size_t d_model, std::size_t d_ff);
  [[nodiscard]] ad::Tensor<T> operator()(const ad::Tensor<T>& x) const;
  void collect(const std::string& prefix, nn::ParamList<T>& out) const;
};

/// Weights of one HIBA block: intra and inter attention, two FFNs, four norms.
template <typename T>
struct HibaParams {
  AttentionParams<T> intra_attn;
  AttentionParams<T> inter_attn;
  FfnParams<T> ffn1;
  FfnParams<T> ffn2;
  ad::Tensor<T> norm1, norm2, norm3, norm4;

  static HibaParams init(CounterRng& rng, std::size_t d_model, std::size_t d_ff,
                         std::size_t heads_q, std::size_t heads_kv);
  void collect(const std::string& prefix, nn::ParamList<T>& out) const;
  /// Zeroes attention output projections and FFN down projections.
  void zero_residual_branches();
};

struct BlockToggles {
  /// Both attentions become dense causal attention over the whole sequence.
  bool standard_attention = false;
  /// Intra-block attention becomes causal.
  bool causal_intra = false;
  /// Pre-norm residuals (x + f(norm(x))) instead of post-norm (norm(x + f(x))).
  bool prenorm = false;
};

/// One HIBA block on `batch` sequences of `n` tokens stored as [batch*n, d]:
/// intra attn -> add&norm -> FFN -> add&norm -> inter attn -> add&norm -> FFN -> add&norm.
template <typename T>
ad::Tensor<T> hiba_block(const ad::Tensor<T>& h, const HibaParams<T>& params, std::size_t batch,
                         std::size_t n, std::size_t block_size, const BlockToggles& toggles,
                         PairCounter* counter = nullptr);

/// Applies every block in order with the schedule's block size per layer.
template <typename T>
ad::Tensor<T> hiba_forward(const ad::Tensor<T>& h0, std::span<const HibaParams<T>> layers,
                           std::size_t batch, std::size_t n, const BlockSchedule& schedule,
                           const BlockToggles& toggles, PairCounter* counter = nullptr);

}  // namespace hiba
