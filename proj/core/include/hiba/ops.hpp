// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hiba/tensor.hpp"

// Differentiable forward ops. Shapes must conform exactly; the only implicit
// broadcast is a right operand whose shape is a trailing suffix of the left
// operand's shape (e.g. a bias [n] added to [rows, n]).
namespace hiba::ad {

/// [..., m, k] x [k, n] -> [..., m, n]; leading dims of `a` are folded into rows.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// [b, m, k] x [b, k, n] -> [b, m, n].
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b);

/// Swaps the last two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s);

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start, std::size_t length);
/// Rows of `a` viewed as [dim0, rest...]; indices may repeat.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, std::span<const std::size_t> indices);
template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

/// Softmax over the last axis.
template <typename T>
Tensor<T> softmax(const Tensor<T>& a);

/// Softmax over the last axis with `masked[i] != 0` excluded (probability 0).
/// Throws MaskingError if a row is entirely masked.
template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& a, std::span<const std::uint8_t> masked);

/// Replaces positions with `masked[i] != 0` by `value`; no gradient flows there.
template <typename T>
Tensor<T> masked_fill(const Tensor<T>& a, std::span<const std::uint8_t> masked, T value);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T>
Tensor<T> silu(const Tensor<T>& a);

template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);
/// Mean over the last axis: [..., k] -> [...].
template <typename T>
Tensor<T> mean_last(const Tensor<T>& a);
/// Population standard deviation over the last axis: [..., k] -> [...].
template <typename T>
Tensor<T> std_last(const Tensor<T>& a);

/// x / sqrt(mean(x^2) + eps) * gain over the last axis.
template <typename T>
Tensor<T> rms_norm(const Tensor<T>& x, const Tensor<T>& gain, T eps = T(1e-6));

/// Rotary position rotation on [rows, heads * head_dim]; row r is rotated by
/// angle positions[r] * base^(-2i/head_dim) on each interleaved pair (2i, 2i+1).
template <typename T>
Tensor<T> rotary(const Tensor<T>& x, std::span<const double> positions, std::size_t heads,
                 double base = 10000.0);

/// Large negative additive mask constant used before softmax.
template <typename T>
constexpr T mask_value() {
  return T(-1e9);
}

}  // namespace hiba::ad
