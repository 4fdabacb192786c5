// SPDX-License-Identifier: Apache-2.0
#include "hiba/hiba_block.hpp"

#include <numeric>

#include "hiba/errors.hpp"

namespace hiba {

std::size_t BlockSchedule::size_for_layer(std::size_t layer) const {
  require(!sizes.empty(), "block schedule is empty");
  return sizes[layer % sizes.size()];
}

std::size_t BlockSchedule::lcm() const {
  std::size_t l = 1;
  for (auto b : sizes) l = std::lcm(l, b);
  return l;
}

std::size_t BlockSchedule::num_blocks(std::size_t n, std::size_t layer) const {
  const std::size_t b = size_for_layer(layer);
  require(n % b == 0, "token count " + std::to_string(n) + " not divisible by block size " +
                          std::to_string(b));
  return n / b;
}

void BlockSchedule::validate() const {
  require(!sizes.empty(), "block schedule is empty");
  for (auto b : sizes) require(b >= 1, "block sizes must be >= 1");
}

template <typename T>
FfnParams<T> FfnParams<T>::init(CounterRng& rng, std::size_t d_model, std::size_t d_ff) {
  FfnParams f;
  f.gate = nn::Linear<T>::init(rng, d_model, d_ff, false);
  f.up = nn::Linear<T>::init(rng, d_model, d_ff, false);
  f.down = nn::Linear<T>::init(rng, d_ff, d_model, false);
  return f;
}

template <typename T>
ad::Tensor<T> FfnParams<T>::operator()(const ad::Tensor<T>& x) const {
  return down(ad::mul(ad::silu(gate(x)), up(x)));
}

template <typename T>
void FfnParams<T>::collect(const std::string& prefix, nn::ParamList<T>& out) const {
  gate.collect(prefix + ".gate", out);
  up.collect(prefix + ".up", out);
  down.collect(prefix + ".down", out);
}

template <typename T>
HibaParams<T> HibaParams<T>::init(CounterRng& rng, std::size_t d_model, std::size_t d_ff,
                                  std::size_t heads_q, std::size_t heads_kv) {
  HibaParams p;
  p.intra_attn = AttentionParams<T>::init(rng, d_model, heads_q, heads_kv);
  p.ffn1 = FfnParams<T>::init(rng, d_model, d_ff);
  p.inter_attn = AttentionParams<T>::init(rng, d_model, heads_q, heads_kv);
  p.ffn2 = FfnParams<T>::init(rng, d_model, d_ff);
  p.norm1 = nn::ones_param<T>(d_model);
  p.norm2 = nn::ones_param<T>(d_model);
  p.norm3 = nn::ones_param<T>(d_model);
  p.norm4 = nn::ones_param<T>(d_model);
  return p;
}

template <typename T>
void HibaParams<T>::collect(const std::string& prefix, nn::ParamList<T>& out) const {
  intra_attn.collect(prefix + ".intra_attn", out);
  out.emplace_back(prefix + ".norm1", norm1);
  ffn1.collect(prefix + ".ffn1", out);
  out.emplace_back(prefix + ".norm2", norm2);
  inter_attn.collect(prefix + ".inter_attn", out);
  out.emplace_back(prefix + ".norm3", norm3);
  ffn2.collect(prefix + ".ffn2", out);
  out.emplace_back(prefix + ".norm4", norm4);
}

template <typename T>
void HibaParams<T>::zero_residual_branches() {
  intra_attn.wo.zero_();
  inter_attn.wo.zero_();
  ffn1.down.zero_();
  ffn2.down.zero_();
}

namespace {

template <typename T, typename F>
ad::Tensor<T> residual(const ad::Tensor<T>& x, const ad::Tensor<T>& gain, bool prenorm, F&& f) {
  if (prenorm) return ad::add(x, f(ad::rms_norm(x, gain)));
  return ad::rms_norm(ad::add(x, f(x)), gain);
}

}  // namespace

template <typename T>
ad::Tensor<T> hiba_block(const ad::Tensor<T>& h, const HibaParams<T>& params, std::size_t batch,
                         std::size_t n, std::size_t block_size, const BlockToggles& toggles,
                         PairCounter* counter) {
  require(h.rank() == 2 && h.dim(0) == batch * n,
          "hiba_block: expected [" + std::to_string(batch * n) + ", d], got " +
              ad::to_string(h.shape()));
  require(n % block_size == 0, "hiba_block: n = " + std::to_string(n) +
                                   " is not divisible by B = " + std::to_string(block_size));
  AttentionPlan first, second;
  if (toggles.standard_attention) {
    first = make_plan(MaskKind::dense_causal, batch, n, block_size);
    second = first;
  } else {
    first = make_plan(toggles.causal_intra ? MaskKind::intra_causal : MaskKind::intra_noncausal,
                      batch, n, block_size);
    second = make_plan(MaskKind::inter_strided_causal, batch, n, block_size);
  }
  const bool pre = toggles.prenorm;
  auto x = residual(h, params.norm1, pre, [&](const ad::Tensor<T>& in) {
    return attention_layer(in, params.intra_attn, first, counter);
  });
  x = residual(x, params.norm2, pre, [&](const ad::Tensor<T>& in) { return params.ffn1(in); });
  x = residual(x, params.norm3, pre, [&](const ad::Tensor<T>& in) {
    return attention_layer(in, params.inter_attn, second, counter);
  });
  x = residual(x, params.norm4, pre, [&](const ad::Tensor<T>& in) { return params.ffn2(in); });
  return x;
}

template <typename T>
ad::Tensor<T> hiba_forward(const ad::Tensor<T>& h0, std::span<const HibaParams<T>> layers,
                           std::size_t batch, std::size_t n, const BlockSchedule& schedule,
                           const BlockToggles& toggles, PairCounter* counter) {
  schedule.validate();
  require(n % schedule.lcm() == 0, "hiba_forward: token count " + std::to_string(n) +
                                       " must be a multiple of " + std::to_string(schedule.lcm()));
  ad::Tensor<T> h = h0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = hiba_block(h, layers[l], batch, n, schedule.size_for_layer(l), toggles, counter);
  }
  return h;
}

template struct FfnParams<float>;
template struct FfnParams<double>;
template struct HibaParams<float>;
template struct HibaParams<double>;
template ad::Tensor<float> hiba_block(const ad::Tensor<float>&, const HibaParams<float>&,
                                      std::size_t, std::size_t, std::size_t, const BlockToggles&,
                                      PairCounter*);
template ad::Tensor<double> hiba_block(const ad::Tensor<double>&, const HibaParams<double>&,
                                       std::size_t, std::size_t, std::size_t,
                                       const BlockToggles&, PairCounter*);
template ad::Tensor<float> hiba_forward(const ad::Tensor<float>&, std::span<const HibaParams<float>>,
                                        std::size_t, std::size_t, const BlockSchedule&,
                                        const BlockToggles&, PairCounter*);
template ad::Tensor<double> hiba_forward(const ad::Tensor<double>&,
                                         std::span<const HibaParams<double>>, std::size_t,
                                         std::size_t, const BlockSchedule&, const BlockToggles&,
                                         PairCounter*);

}  // namespace hiba
