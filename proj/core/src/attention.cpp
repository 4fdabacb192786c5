// SPDX-License-Identifier: Apache-2.0
#include "hiba/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hiba/errors.hpp"
#include "hiba/ops.hpp"

namespace hiba {

std::string_view to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::intra_noncausal: return "intra_noncausal";
    case MaskKind::intra_causal: return "intra_causal";
    case MaskKind::inter_strided_causal: return "inter_strided_causal";
    case MaskKind::dense_causal: return "dense_causal";
  }
  return "unknown";
}

bool AttentionMaskSpec::allows(std::size_t i, std::size_t j) const {
  const std::size_t b = block_size;
  switch (kind) {
    case MaskKind::intra_noncausal: return i / b == j / b;
    case MaskKind::intra_causal: return i / b == j / b && j <= i;
    case MaskKind::inter_strided_causal: return i % b == j % b && j / b <= i / b;
    case MaskKind::dense_causal: return j <= i;
  }
  return false;
}

double AttentionMaskSpec::position(std::size_t i) const {
  return kind == MaskKind::inter_strided_causal ? static_cast<double>(i / block_size)
                                                : static_cast<double>(i);
}

std::uint64_t AttentionPlan::score_pairs() const {
  const std::uint64_t s = group_size;
  const std::uint64_t per_group = skip_masked && causal ? s * (s + 1) / 2 : s * s;
  return per_group * groups();
}

AttentionPlan make_plan(MaskKind kind, std::size_t batch, std::size_t n, std::size_t block_size) {
  require(block_size >= 1, "make_plan: block size must be >= 1");
  AttentionPlan plan;
  plan.spec = {kind, kind == MaskKind::dense_causal ? n : block_size};
  if (kind != MaskKind::dense_causal) {
    require(n % block_size == 0, "make_plan: token count " + std::to_string(n) +
                                     " is not divisible by block size " +
                                     std::to_string(block_size));
  }
  const std::size_t m = kind == MaskKind::dense_causal ? 1 : n / block_size;
  plan.rows.reserve(batch * n);
  plan.positions.resize(batch * n);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n; ++i) plan.positions[b * n + i] = plan.spec.position(i);
  }
  switch (kind) {
    case MaskKind::intra_noncausal:
    case MaskKind::intra_causal:
      plan.group_size = block_size;
      plan.causal = kind == MaskKind::intra_causal;
      for (std::size_t r = 0; r < batch * n; ++r) plan.rows.push_back(r);
      break;
    case MaskKind::inter_strided_causal:
      plan.group_size = m;
      plan.causal = true;
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t lane = 0; lane < block_size; ++lane) {
          for (std::size_t j = 0; j < m; ++j) plan.rows.push_back(b * n + j * block_size + lane);
        }
      }
      break;
    case MaskKind::dense_causal:
      plan.group_size = n;
      plan.causal = true;
      plan.skip_masked = true;
      for (std::size_t r = 0; r < batch * n; ++r) plan.rows.push_back(r);
      break;
  }
  return plan;
}

template <typename T>
ad::Tensor<T> grouped_attention(const ad::Tensor<T>& q, const ad::Tensor<T>& k,
                                const ad::Tensor<T>& v, const AttentionPlan& plan,
                                std::size_t heads_q, std::size_t heads_kv, PairCounter* counter) {
  require(q.rank() == 2 && k.rank() == 2 && v.rank() == 2, "attention: inputs must be 2-D");
  require(heads_kv >= 1 && heads_q % heads_kv == 0,
          "attention: query heads must be a multiple of key/value heads");
  const std::size_t rows = q.dim(0);
  require(k.dim(0) == rows && v.dim(0) == rows, "attention: row counts differ");
  require(q.dim(1) % heads_q == 0, "attention: query width not divisible by heads");
  const std::size_t hd = q.dim(1) / heads_q;
  require(k.dim(1) == heads_kv * hd && v.dim(1) == heads_kv * hd,
          "attention: key/value width must be heads_kv * head_dim");
  require(plan.rows.size() == rows, "attention: plan covers " + std::to_string(plan.rows.size()) +
                                        " rows, input has " + std::to_string(rows));

  const std::size_t s = plan.group_size;
  const std::size_t groups = plan.groups();
  const std::size_t qw = heads_q * hd, kw = heads_kv * hd;
  const std::size_t group_ratio = heads_q / heads_kv;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  const bool causal = plan.causal, skip = plan.skip_masked;

  // probs[g][h][i][j]; masked or skipped entries stay exactly 0.
  std::vector<T> probs(groups * heads_q * s * s, T(0));
  std::vector<T> out(rows * qw, T(0));
  std::vector<T> scores(s);
  const T* qd = q.data().data();
  const T* kd = k.data().data();
  const T* vd = v.data().data();
  std::uint64_t pairs = 0;

  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t* grow = plan.rows.data() + g * s;
    for (std::size_t h = 0; h < heads_q; ++h) {
      const std::size_t kh = h / group_ratio;
      for (std::size_t i = 0; i < s; ++i) {
        const T* qi = qd + grow[i] * qw + h * hd;
        const std::size_t limit = skip && causal ? i + 1 : s;
        if (h == 0) pairs += limit;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < limit; ++j) {
          const T* kj = kd + grow[j] * kw + kh * hd;
          T dot = 0;
          for (std::size_t c = 0; c < hd; ++c) dot += qi[c] * kj[c];
          scores[j] = dot * scale;
          if (causal && j > i) scores[j] += ad::mask_value<T>();
          else mx = std::max(mx, scores[j]);
        }
        T* p = probs.data() + ((g * heads_q + h) * s + i) * s;
        T total = 0;
        for (std::size_t j = 0; j < limit; ++j) {
          if (causal && j > i) continue;  // exp(mask - mx) underflows to exactly 0
          p[j] = std::exp(scores[j] - mx);
          total += p[j];
        }
        T* oi = out.data() + grow[i] * qw + h * hd;
        for (std::size_t j = 0; j < limit; ++j) {
          if (p[j] == T(0)) continue;
          p[j] /= total;
          const T* vj = vd + grow[j] * kw + kh * hd;
          for (std::size_t c = 0; c < hd; ++c) oi[c] += p[j] * vj[c];
        }
      }
    }
  }
  if (counter) {
    counter->pairs += pairs;
    counter->per_call.push_back(pairs);
  }

  const std::vector<std::size_t>* plan_rows = &plan.rows;
  return ad::make_result<T>(
      ad::Shape{rows, qw}, std::move(out), "grouped_attention", {q, k, v},
      [probs = std::move(probs), rows_copy = *plan_rows, s, groups, heads_q, group_ratio, hd, qw,
       kw, scale](ad::Node<T>& self) {
        const T* qd = self.inputs[0]->data.data();
        const T* kd = self.inputs[1]->data.data();
        const T* vd = self.inputs[2]->data.data();
        T* gq = self.inputs[0]->requires_grad ? self.inputs[0]->ensure_grad().data() : nullptr;
        T* gk = self.inputs[1]->requires_grad ? self.inputs[1]->ensure_grad().data() : nullptr;
        T* gv = self.inputs[2]->requires_grad ? self.inputs[2]->ensure_grad().data() : nullptr;
        const T* go = self.grad.data();
        std::vector<T> dp(s);
        for (std::size_t g = 0; g < groups; ++g) {
          const std::size_t* grow = rows_copy.data() + g * s;
          for (std::size_t h = 0; h < heads_q; ++h) {
            const std::size_t kh = h / group_ratio;
            for (std::size_t i = 0; i < s; ++i) {
              const T* p = probs.data() + ((g * heads_q + h) * s + i) * s;
              const T* doi = go + grow[i] * qw + h * hd;
              T dot = 0;
              for (std::size_t j = 0; j < s; ++j) {
                dp[j] = 0;
                if (p[j] == T(0)) continue;
                const T* vj = vd + grow[j] * kw + kh * hd;
                for (std::size_t c = 0; c < hd; ++c) dp[j] += doi[c] * vj[c];
                dot += p[j] * dp[j];
                if (gv) {
                  T* gvj = gv + grow[j] * kw + kh * hd;
                  for (std::size_t c = 0; c < hd; ++c) gvj[c] += p[j] * doi[c];
                }
              }
              const T* qi = qd + grow[i] * qw + h * hd;
              T* gqi = gq ? gq + grow[i] * qw + h * hd : nullptr;
              for (std::size_t j = 0; j < s; ++j) {
                if (p[j] == T(0)) continue;
                const T ds = p[j] * (dp[j] - dot) * scale;
                const T* kj = kd + grow[j] * kw + kh * hd;
                if (gqi) {
                  for (std::size_t c = 0; c < hd; ++c) gqi[c] += ds * kj[c];
                }
                if (gk) {
                  T* gkj = gk + grow[j] * kw + kh * hd;
                  for (std::size_t c = 0; c < hd; ++c) gkj[c] += ds * qi[c];
                }
              }
            }
          }
        }
      });
}

template <typename T>
AttentionParams<T> AttentionParams<T>::init(CounterRng& rng, std::size_t d_model,
                                            std::size_t heads_q, std::size_t heads_kv) {
  require(heads_q >= 1 && heads_kv >= 1 && heads_q % heads_kv == 0,
          "attention: H_q must be divisible by H_kv");
  require(d_model % heads_q == 0, "attention: d_model must be divisible by H_q");
  const std::size_t hd = d_model / heads_q;
  require(hd % 2 == 0, "attention: head_dim must be even for rotary embedding");
  AttentionParams p;
  p.wq = nn::Linear<T>::init(rng, d_model, heads_q * hd, false);
  p.wk = nn::Linear<T>::init(rng, d_model, heads_kv * hd, false);
  p.wv = nn::Linear<T>::init(rng, d_model, heads_kv * hd, false);
  p.wo = nn::Linear<T>::init(rng, heads_q * hd, d_model, false);
  p.heads_q = heads_q;
  p.heads_kv = heads_kv;
  return p;
}

template <typename T>
void AttentionParams<T>::collect(const std::string& prefix, nn::ParamList<T>& out) const {
  wq.collect(prefix + ".wq", out);
  wk.collect(prefix + ".wk", out);
  wv.collect(prefix + ".wv", out);
  wo.collect(prefix + ".wo", out);
}

template <typename T>
ad::Tensor<T> attention_layer(const ad::Tensor<T>& h, const AttentionParams<T>& params,
                              const AttentionPlan& plan, PairCounter* counter) {
  auto q = ad::rotary(params.wq(h), plan.positions, params.heads_q, params.rope_base);
  auto k = ad::rotary(params.wk(h), plan.positions, params.heads_kv, params.rope_base);
  auto v = params.wv(h);
  return params.wo(grouped_attention(q, k, v, plan, params.heads_q, params.heads_kv, counter));
}

template <typename T>
ad::Tensor<T> partition(const ad::Tensor<T>& h, std::size_t block_size) {
  require(h.rank() == 2, "partition: expected [n, d], got " + ad::to_string(h.shape()));
  require(block_size >= 1 && h.dim(0) % block_size == 0,
          "partition: n = " + std::to_string(h.dim(0)) + " is not divisible by B = " +
              std::to_string(block_size));
  return ad::reshape(h, {h.dim(0) / block_size, block_size, h.dim(1)});
}

namespace {

template <typename T>
ad::Tensor<T> blocked_attention(const ad::Tensor<T>& blocked, const AttentionParams<T>& params,
                                MaskKind kind, PairCounter* counter) {
  require(blocked.rank() == 3, "attention: expected [M, B, d], got " +
                                   ad::to_string(blocked.shape()));
  const std::size_t m = blocked.dim(0), b = blocked.dim(1), d = blocked.dim(2);
  const auto flat = ad::reshape(blocked, {m * b, d});
  const auto plan = make_plan(kind, 1, m * b, b);
  return ad::reshape(attention_layer(flat, params, plan, counter), {m, b, d});
}

}  // namespace

template <typename T>
ad::Tensor<T> intra_attention(const ad::Tensor<T>& blocked, const AttentionParams<T>& params,
                              bool causal, PairCounter* counter) {
  return blocked_attention(blocked, params,
                           causal ? MaskKind::intra_causal : MaskKind::intra_noncausal, counter);
}

template <typename T>
ad::Tensor<T> inter_attention(const ad::Tensor<T>& blocked, const AttentionParams<T>& params,
                              PairCounter* counter) {
  return blocked_attention(blocked, params, MaskKind::inter_strided_causal, counter);
}

#define HIBA_INSTANTIATE_ATTENTION(T)                                                          \
  template ad::Tensor<T> grouped_attention(const ad::Tensor<T>&, const ad::Tensor<T>&,         \
                                           const ad::Tensor<T>&, const AttentionPlan&,         \
                                           std::size_t, std::size_t, PairCounter*);            \
  template struct AttentionParams<T>;                                                          \
  template ad::Tensor<T> attention_layer(const ad::Tensor<T>&, const AttentionParams<T>&,      \
                                         const AttentionPlan&, PairCounter*);                  \
  template ad::Tensor<T> partition(const ad::Tensor<T>&, std::size_t);                         \
  template ad::Tensor<T> intra_attention(const ad::Tensor<T>&, const AttentionParams<T>&,      \
                                         bool, PairCounter*);                                  \
  template ad::Tensor<T> inter_attention(const ad::Tensor<T>&, const AttentionParams<T>&,      \
                                         PairCounter*);

HIBA_INSTANTIATE_ATTENTION(float)
HIBA_INSTANTIATE_ATTENTION(double)

#undef HIBA_INSTANTIATE_ATTENTION

}  // namespace hiba
