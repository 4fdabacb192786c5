// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hiba/ops.hpp"
#include "hiba/random.hpp"
#include "hiba/tensor.hpp"

namespace hiba::nn {

using ad::Tensor;

/// Named parameter handles; copies alias the model's storage.
template <typename T>
using ParamList = std::vector<std::pair<std::string, Tensor<T>>>;

/// Leaf [rows, cols] drawn from N(0, stddev^2).
template <typename T>
Tensor<T> normal_param(CounterRng& rng, std::size_t rows, std::size_t cols, double stddev) {
  std::vector<T> v(rows * cols);
  for (auto& x : v) x = static_cast<T>(rng.normal(0.0, stddev));
  return Tensor<T>::from({rows, cols}, std::move(v), true);
}

template <typename T>
Tensor<T> zeros_param(std::size_t n) {
  return Tensor<T>::zeros({n}, true);
}

template <typename T>
Tensor<T> ones_param(std::size_t n) {
  return Tensor<T>::full({n}, T(1), true);
}

/// y = x W (+ b).
template <typename T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out] or undefined

  static Linear init(CounterRng& rng, std::size_t in, std::size_t out, bool with_bias,
                     double gain = 1.0) {
    Linear l;
    l.weight = normal_param<T>(rng, in, out, gain / std::sqrt(static_cast<double>(in)));
    if (with_bias) l.bias = zeros_param<T>(out);
    return l;
  }

  [[nodiscard]] Tensor<T> operator()(const Tensor<T>& x) const {
    Tensor<T> y = ad::matmul(x, weight);
    return bias.defined() ? ad::add(y, bias) : y;
  }

  void collect(const std::string& prefix, ParamList<T>& out) const {
    out.emplace_back(prefix + ".weight", weight);
    if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
  }

  void zero_() {
    auto w = Tensor<T>(weight).mutable_data();
    std::fill(w.begin(), w.end(), T(0));
    if (bias.defined()) {
      auto b = Tensor<T>(bias).mutable_data();
      std::fill(b.begin(), b.end(), T(0));
    }
  }
};

/// Two-layer perceptron with SiLU between the layers.
template <typename T>
struct Mlp {
  Linear<T> hidden;
  Linear<T> output;

  [[nodiscard]] Tensor<T> operator()(const Tensor<T>& x) const {
    return output(ad::silu(hidden(x)));
  }

  void collect(const std::string& prefix, ParamList<T>& out) const {
    hidden.collect(prefix + ".hidden", out);
    output.collect(prefix + ".output", out);
  }
};

template <typename T>
std::size_t parameter_count(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

}  // namespace hiba::nn
