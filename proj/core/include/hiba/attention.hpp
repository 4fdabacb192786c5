// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "hiba/nn.hpp"
#include "hiba/tensor.hpp"

namespace hiba {

enum class MaskKind { intra_noncausal, intra_causal, inter_strided_causal, dense_causal };

std::string_view to_string(MaskKind kind);

/// Which (query, key) token pairs of one sequence may interact.
struct AttentionMaskSpec {
  MaskKind kind = MaskKind::intra_noncausal;
  std::size_t block_size = 1;

  /// Whether query token `i` may attend to key token `j` (0-based).
  [[nodiscard]] bool allows(std::size_t i, std::size_t j) const;
  /// Rotary position for token `i`: its index, or its block index for
  /// strided inter-block lanes.
  [[nodiscard]] double position(std::size_t i) const;
};

/// Gathered execution layout: rows are grouped into equal-sized groups (one
/// block or one strided lane per group) and attention runs inside each group.
struct AttentionPlan {
  AttentionMaskSpec spec;
  std::size_t group_size = 0;
  std::vector<std::size_t> rows;  // group-major, rows.size() == groups * group_size
  std::vector<double> positions;  // rotary position per row of the input
  bool causal = false;            // within-group lower-triangular mask
  bool skip_masked = false;       // compute only visible scores instead of mask-after

  [[nodiscard]] std::size_t groups() const { return group_size ? rows.size() / group_size : 0; }
  /// Score computations one head performs under this plan.
  [[nodiscard]] std::uint64_t score_pairs() const;
};

/// Plan for `batch` sequences of `n` tokens stored row-major as [batch * n, d].
/// Intra plans group contiguous blocks; inter plans group tokens sharing a
/// within-block offset (token j*B + m for fixed m) and mask causally over j.
/// Dense causal plans skip masked scores; block plans compute full score
/// tiles and mask them.
AttentionPlan make_plan(MaskKind kind, std::size_t batch, std::size_t n, std::size_t block_size);

/// Counts attention score computations (one per query/key pair per layer,
/// independent of head count).
struct PairCounter {
  std::uint64_t pairs = 0;
  std::vector<std::uint64_t> per_call;
};

/// Grouped-query masked attention on pre-projected, pre-rotated inputs.
/// q: [rows, heads_q*hd], k/v: [rows, heads_kv*hd] -> [rows, heads_q*hd].
template <typename T>
ad::Tensor<T> grouped_attention(const ad::Tensor<T>& q, const ad::Tensor<T>& k,
                                const ad::Tensor<T>& v, const AttentionPlan& plan,
                                std::size_t heads_q, std::size_t heads_kv,
                                PairCounter* counter = nullptr);

template <typename T>
struct AttentionParams {
  nn::Linear<T> wq, wk, wv, wo;
  std::size_t heads_q = 1;
  std::size_t heads_kv = 1;
  double rope_base = 10000.0;

  static AttentionParams init(CounterRng& rng, std::size_t d_model, std::size_t heads_q,
                              std::size_t heads_kv);
  [[nodiscard]] std::size_t head_dim() const { return wq.weight.dim(1) / heads_q; }
  void collect(const std::string& prefix, nn::ParamList<T>& out) const;
};

/// Multi-head self-attention sublayer: project, rotate q/k, attend, project out.
template <typename T>
ad::Tensor<T> attention_layer(const ad::Tensor<T>& h, const AttentionParams<T>& params,
                              const AttentionPlan& plan, PairCounter* counter = nullptr);

/// [n, d] -> [M, B, d]; block j, offset p holds token j*B + p.
template <typename T>
ad::Tensor<T> partition(const ad::Tensor<T>& h, std::size_t block_size);

/// Attention inside each block of a [M, B, d] view.
template <typename T>
ad::Tensor<T> intra_attention(const ad::Tensor<T>& blocked, const AttentionParams<T>& params,
                              bool causal = false, PairCounter* counter = nullptr);

/// Causal attention along each within-block offset lane of a [M, B, d] view.
template <typename T>
ad::Tensor<T> inter_attention(const ad::Tensor<T>& blocked, const AttentionParams<T>& params,
                              PairCounter* counter = nullptr);

}  // namespace hiba
