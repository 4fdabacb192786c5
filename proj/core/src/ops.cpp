// SPDX-License-Identifier: Apache-2.0
#include "hiba/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "hiba/errors.hpp"

namespace hiba::ad {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const RowMat<T>>;
template <typename T>
using MapM = Eigen::Map<RowMat<T>>;

// Grad buffer of input `i` if it participates in differentiation.
template <typename T>
std::vector<T>* input_grad(Node<T>& self, std::size_t i) {
  Node<T>& in = *self.inputs[i];
  return in.requires_grad ? &in.ensure_grad() : nullptr;
}

bool is_suffix(const Shape& full, const Shape& suffix) {
  if (suffix.size() > full.size()) return false;
  return std::equal(suffix.begin(), suffix.end(), full.end() - static_cast<long>(suffix.size()));
}

void check_binary(const Shape& a, const Shape& b, const char* op) {
  require(is_suffix(a, b) && !b.empty() ? true : a == b,
          std::string(op) + ": shapes " + to_string(a) + " and " + to_string(b) +
              " do not conform (right operand must equal or be a trailing suffix)");
}

std::size_t last_dim(const Shape& s, const char* op) {
  require(!s.empty(), std::string(op) + ": needs rank >= 1");
  return s.back();
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() >= 2 && b.rank() == 2,
          "matmul: expected [..., m, k] x [k, n], got " + to_string(a.shape()) + " x " +
              to_string(b.shape()));
  const std::size_t k = a.shape().back();
  require(b.dim(0) == k, "matmul: inner dims differ, " + to_string(a.shape()) + " x " +
                             to_string(b.shape()));
  const std::size_t rows = a.numel() / k;
  const std::size_t n = b.dim(1);
  std::vector<T> out(rows * n);
  MapM<T>(out.data(), rows, n).noalias() =
      MapC<T>(a.data().data(), rows, k) * MapC<T>(b.data().data(), k, n);
  Shape shape = a.shape();
  shape.back() = n;
  return make_result<T>(std::move(shape), std::move(out), "matmul", {a, b},
                        [rows, k, n](Node<T>& self) {
                          MapC<T> g(self.grad.data(), rows, n);
                          if (auto* ga = input_grad(self, 0)) {
                            MapM<T>(ga->data(), rows, k).noalias() +=
                                g * MapC<T>(self.inputs[1]->data.data(), k, n).transpose();
                          }
                          if (auto* gb = input_grad(self, 1)) {
                            MapM<T>(gb->data(), k, n).noalias() +=
                                MapC<T>(self.inputs[0]->data.data(), rows, k).transpose() * g;
                          }
                        });
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(1),
          "bmm: expected [b, m, k] x [b, k, n], got " + to_string(a.shape()) + " x " +
              to_string(b.shape()));
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  std::vector<T> out(batch * m * n);
  for (std::size_t i = 0; i < batch; ++i) {
    MapM<T>(out.data() + i * m * n, m, n).noalias() =
        MapC<T>(a.data().data() + i * m * k, m, k) * MapC<T>(b.data().data() + i * k * n, k, n);
  }
  return make_result<T>(
      Shape{batch, m, n}, std::move(out), "bmm", {a, b}, [batch, m, k, n](Node<T>& self) {
        auto* ga = input_grad(self, 0);
        auto* gb = input_grad(self, 1);
        for (std::size_t i = 0; i < batch; ++i) {
          MapC<T> g(self.grad.data() + i * m * n, m, n);
          if (ga) {
            MapM<T>(ga->data() + i * m * k, m, k).noalias() +=
                g * MapC<T>(self.inputs[1]->data.data() + i * k * n, k, n).transpose();
          }
          if (gb) {
            MapM<T>(gb->data() + i * k * n, k, n).noalias() +=
                MapC<T>(self.inputs[0]->data.data() + i * m * k, m, k).transpose() * g;
          }
        }
      });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require(a.rank() >= 2, "transpose: needs rank >= 2, got " + to_string(a.shape()));
  const std::size_t r = a.dim(a.rank() - 2), c = a.dim(a.rank() - 1);
  const std::size_t batch = a.numel() / (r * c);
  std::vector<T> out(a.numel());
  for (std::size_t b = 0; b < batch; ++b) {
    MapM<T>(out.data() + b * r * c, c, r) = MapC<T>(a.data().data() + b * r * c, r, c).transpose();
  }
  Shape shape = a.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  return make_result<T>(std::move(shape), std::move(out), "transpose", {a},
                        [batch, r, c](Node<T>& self) {
                          auto* ga = input_grad(self, 0);
                          for (std::size_t b = 0; b < batch; ++b) {
                            MapM<T>(ga->data() + b * r * c, r, c) +=
                                MapC<T>(self.grad.data() + b * r * c, c, r).transpose();
                          }
                        });
}

namespace {

enum class Binary { add, sub, mul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, Binary kind, const char* op) {
  check_binary(a.shape(), b.shape(), op);
  const std::size_t n = a.numel(), m = b.numel();
  std::vector<T> out(n);
  const T* x = a.data().data();
  const T* y = b.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const T yi = y[i % m];
    switch (kind) {
      case Binary::add: out[i] = x[i] + yi; break;
      case Binary::sub: out[i] = x[i] - yi; break;
      case Binary::mul: out[i] = x[i] * yi; break;
    }
  }
  return make_result<T>(a.shape(), std::move(out), op, {a, b}, [n, m, kind](Node<T>& self) {
    const T* g = self.grad.data();
    if (auto* ga = input_grad(self, 0)) {
      const T* y = self.inputs[1]->data.data();
      for (std::size_t i = 0; i < n; ++i) {
        (*ga)[i] += kind == Binary::mul ? g[i] * y[i % m] : g[i];
      }
    }
    if (auto* gb = input_grad(self, 1)) {
      const T* x = self.inputs[0]->data.data();
      for (std::size_t i = 0; i < n; ++i) {
        const T gi = kind == Binary::add ? g[i] : kind == Binary::sub ? -g[i] : g[i] * x[i];
        (*gb)[i % m] += gi;
      }
    }
  });
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::add, "add");
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::sub, "sub");
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::mul, "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  return make_result<T>(a.shape(), std::move(out), "scale", {a}, [s](Node<T>& self) {
    auto& ga = *input_grad(self, 0);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * self.grad[i];
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v += s;
  return make_result<T>(a.shape(), std::move(out), "add_scalar", {a}, [](Node<T>& self) {
    auto& ga = *input_grad(self, 0);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& first = parts[0].shape();
  require(axis < first.size(), "concat: axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  std::vector<std::size_t> widths;  // per-part extent along axis, times inner
  std::size_t total_axis = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    require(s.size() == first.size(), "concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      require(i == axis || s[i] == first[i],
              "concat: shapes " + to_string(first) + " and " + to_string(s) + " differ off-axis");
    }
    widths.push_back(s[axis] * inner);
    total_axis += s[axis];
  }
  const std::size_t row = total_axis * inner;
  std::vector<T> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const T* src = parts[p].data().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src + o * widths[p], widths[p], out.data() + o * row + offset);
    }
    offset += widths[p];
  }
  Shape shape = first;
  shape[axis] = total_axis;
  return make_result<T>(std::move(shape), std::move(out), "concat", parts,
                        [outer, row, widths](Node<T>& self) {
                          std::size_t off = 0;
                          for (std::size_t p = 0; p < widths.size(); ++p) {
                            if (auto* gp = input_grad(self, p)) {
                              for (std::size_t o = 0; o < outer; ++o) {
                                const T* g = self.grad.data() + o * row + off;
                                T* dst = gp->data() + o * widths[p];
                                for (std::size_t i = 0; i < widths[p]; ++i) dst[i] += g[i];
                              }
                            }
                            off += widths[p];
                          }
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = a.shape();
  require(axis < s.size() && start + length <= s[axis],
          "slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
              ") out of bounds for axis " + std::to_string(axis) + " of " + to_string(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t src_row = s[axis] * inner, dst_row = length * inner, off = start * inner;
  std::vector<T> out(outer * dst_row);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(a.data().data() + o * src_row + off, dst_row, out.data() + o * dst_row);
  }
  Shape shape = s;
  shape[axis] = length;
  return make_result<T>(std::move(shape), std::move(out), "slice", {a},
                        [outer, src_row, dst_row, off](Node<T>& self) {
                          auto& ga = *input_grad(self, 0);
                          for (std::size_t o = 0; o < outer; ++o) {
                            for (std::size_t i = 0; i < dst_row; ++i) {
                              ga[o * src_row + off + i] += self.grad[o * dst_row + i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, std::span<const std::size_t> indices) {
  require(a.rank() >= 1, "gather_rows: needs rank >= 1");
  const std::size_t rows = a.dim(0);
  const std::size_t width = rows ? a.numel() / rows : 0;
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<T> out(idx.size() * width);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] < rows, "gather_rows: index " + std::to_string(idx[r]) + " >= " +
                               std::to_string(rows));
    std::copy_n(a.data().data() + idx[r] * width, width, out.data() + r * width);
  }
  Shape shape = a.shape();
  shape[0] = idx.size();
  return make_result<T>(std::move(shape), std::move(out), "gather_rows", {a},
                        [idx = std::move(idx), width](Node<T>& self) {
                          auto& ga = *input_grad(self, 0);
                          for (std::size_t r = 0; r < idx.size(); ++r) {
                            for (std::size_t i = 0; i < width; ++i) {
                              ga[idx[r] * width + i] += self.grad[r * width + i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  require(numel(shape) == a.numel(),
          "reshape: " + to_string(a.shape()) + " cannot become " + to_string(shape));
  std::vector<T> out(a.data().begin(), a.data().end());
  return make_result<T>(std::move(shape), std::move(out), "reshape", {a}, [](Node<T>& self) {
    auto& ga = *input_grad(self, 0);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

namespace {

// Softmax rows in place; masked entries (if any) get exactly zero.
template <typename T>
void softmax_rows(std::vector<T>& v, std::size_t cols, std::span<const std::uint8_t> masked) {
  const std::size_t rows = cols ? v.size() / cols : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = v.data() + r * cols;
    T mx = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!masked.empty() && masked[r * cols + c]) continue;
      mx = std::max(mx, row[c]);
      any = true;
    }
    if (!any) {
      throw MaskingError("softmax: row " + std::to_string(r) + " has every position masked");
    }
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!masked.empty() && masked[r * cols + c]) {
        row[c] = 0;
      } else {
        row[c] = std::exp(row[c] - mx);
        total += row[c];
      }
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= total;
  }
}

template <typename T>
BackwardFn<T> softmax_backward(std::size_t cols) {
  return [cols](Node<T>& self) {
    auto& ga = *input_grad(self, 0);
    const std::size_t rows = self.data.size() / cols;
    for (std::size_t r = 0; r < rows; ++r) {
      const T* p = self.data.data() + r * cols;
      const T* g = self.grad.data() + r * cols;
      T dot = 0;
      for (std::size_t c = 0; c < cols; ++c) dot += p[c] * g[c];
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += p[c] * (g[c] - dot);
    }
  };
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& a) {
  const std::size_t cols = last_dim(a.shape(), "softmax");
  std::vector<T> out(a.data().begin(), a.data().end());
  softmax_rows<T>(out, cols, {});
  return make_result<T>(a.shape(), std::move(out), "softmax", {a}, softmax_backward<T>(cols));
}

template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& a, std::span<const std::uint8_t> masked) {
  require(masked.size() == a.numel(), "masked_softmax: mask size differs from input");
  // Additive large-negative mask, then an exact zero for excluded entries.
  const std::size_t cols = last_dim(a.shape(), "masked_softmax");
  std::vector<T> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (masked[i]) out[i] += mask_value<T>();
  }
  softmax_rows<T>(out, cols, masked);
  return make_result<T>(a.shape(), std::move(out), "masked_softmax", {a},
                        softmax_backward<T>(cols));
}

template <typename T>
Tensor<T> masked_fill(const Tensor<T>& a, std::span<const std::uint8_t> masked, T value) {
  require(masked.size() == a.numel(), "masked_fill: mask size differs from input");
  std::vector<T> out(a.data().begin(), a.data().end());
  std::vector<std::uint8_t> keep(masked.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (masked[i]) out[i] = value;
    keep[i] = masked[i] ? 0 : 1;
  }
  return make_result<T>(a.shape(), std::move(out), "masked_fill", {a},
                        [keep = std::move(keep)](Node<T>& self) {
                          auto& ga = *input_grad(self, 0);
                          for (std::size_t i = 0; i < ga.size(); ++i) {
                            if (keep[i]) ga[i] += self.grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-a.data()[i]));
  return make_result<T>(a.shape(), std::move(out), "sigmoid", {a}, [](Node<T>& self) {
    auto& ga = *input_grad(self, 0);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const T s = self.data[i];
      ga[i] += self.grad[i] * s * (T(1) - s);
    }
  });
}

template <typename T>
Tensor<T> silu(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = a.data()[i];
    out[i] = x / (T(1) + std::exp(-x));
  }
  return make_result<T>(a.shape(), std::move(out), "silu", {a}, [](Node<T>& self) {
    auto& ga = *input_grad(self, 0);
    const T* x = self.inputs[0]->data.data();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const T s = T(1) / (T(1) + std::exp(-x[i]));
      ga[i] += self.grad[i] * s * (T(1) + x[i] * (T(1) - s));
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (const T v : a.data()) total += v;
  return make_result<T>(Shape{}, std::vector<T>{total}, "sum", {a}, [](Node<T>& self) {
    auto& ga = *input_grad(self, 0);
    for (auto& g : ga) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  require(a.numel() > 0, "mean: empty tensor");
  T total = 0;
  for (const T v : a.data()) total += v;
  const T inv = T(1) / static_cast<T>(a.numel());
  return make_result<T>(Shape{}, std::vector<T>{total * inv}, "mean", {a},
                        [inv](Node<T>& self) {
                          auto& ga = *input_grad(self, 0);
                          for (auto& g : ga) g += self.grad[0] * inv;
                        });
}

template <typename T>
Tensor<T> mean_last(const Tensor<T>& a) {
  const std::size_t k = last_dim(a.shape(), "mean_last");
  require(k > 0, "mean_last: empty last axis");
  const std::size_t rows = a.numel() / k;
  std::vector<T> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    T total = 0;
    for (std::size_t c = 0; c < k; ++c) total += a.data()[r * k + c];
    out[r] = total / static_cast<T>(k);
  }
  Shape shape(a.shape().begin(), a.shape().end() - 1);
  return make_result<T>(std::move(shape), std::move(out), "mean_last", {a},
                        [k, rows](Node<T>& self) {
                          auto& ga = *input_grad(self, 0);
                          for (std::size_t r = 0; r < rows; ++r) {
                            const T g = self.grad[r] / static_cast<T>(k);
                            for (std::size_t c = 0; c < k; ++c) ga[r * k + c] += g;
                          }
                        });
}

template <typename T>
Tensor<T> std_last(const Tensor<T>& a) {
  const std::size_t k = last_dim(a.shape(), "std_last");
  require(k > 0, "std_last: empty last axis");
  const std::size_t rows = a.numel() / k;
  std::vector<T> out(rows), means(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = a.data().data() + r * k;
    T mu = 0;
    for (std::size_t c = 0; c < k; ++c) mu += x[c];
    mu /= static_cast<T>(k);
    T var = 0;
    for (std::size_t c = 0; c < k; ++c) var += (x[c] - mu) * (x[c] - mu);
    means[r] = mu;
    out[r] = std::sqrt(var / static_cast<T>(k));
  }
  Shape shape(a.shape().begin(), a.shape().end() - 1);
  return make_result<T>(std::move(shape), std::move(out), "std_last", {a},
                        [k, rows, means = std::move(means)](Node<T>& self) {
                          auto& ga = *input_grad(self, 0);
                          const T* x = self.inputs[0]->data.data();
                          for (std::size_t r = 0; r < rows; ++r) {
                            const T sd = self.data[r];
                            if (sd == T(0)) continue;  // subgradient 0 at a constant row
                            const T g = self.grad[r] / (static_cast<T>(k) * sd);
                            for (std::size_t c = 0; c < k; ++c) {
                              ga[r * k + c] += g * (x[r * k + c] - means[r]);
                            }
                          }
                        });
}

template <typename T>
Tensor<T> rms_norm(const Tensor<T>& x, const Tensor<T>& gain, T eps) {
  const std::size_t k = last_dim(x.shape(), "rms_norm");
  require(gain.rank() == 1 && gain.dim(0) == k,
          "rms_norm: gain shape " + to_string(gain.shape()) + " does not match last axis of " +
              to_string(x.shape()));
  const std::size_t rows = x.numel() / k;
  std::vector<T> out(x.numel()), inv(rows);
  const T* xv = x.data().data();
  const T* gv = gain.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    T ss = 0;
    for (std::size_t c = 0; c < k; ++c) ss += xv[r * k + c] * xv[r * k + c];
    inv[r] = T(1) / std::sqrt(ss / static_cast<T>(k) + eps);
    for (std::size_t c = 0; c < k; ++c) out[r * k + c] = xv[r * k + c] * inv[r] * gv[c];
  }
  return make_result<T>(x.shape(), std::move(out), "rms_norm", {x, gain},
                        [k, rows, inv = std::move(inv)](Node<T>& self) {
                          const T* xv = self.inputs[0]->data.data();
                          const T* gv = self.inputs[1]->data.data();
                          const T* g = self.grad.data();
                          auto* gx = input_grad(self, 0);
                          auto* gg = input_grad(self, 1);
                          for (std::size_t r = 0; r < rows; ++r) {
                            const T* xr = xv + r * k;
                            const T* gr = g + r * k;
                            if (gg) {
                              for (std::size_t c = 0; c < k; ++c) (*gg)[c] += gr[c] * xr[c] * inv[r];
                            }
                            if (gx) {
                              // d/dx of x * inv * g: inv*g*dy - x * inv^3 / k * sum(dy*g*x)
                              T dot = 0;
                              for (std::size_t c = 0; c < k; ++c) dot += gr[c] * gv[c] * xr[c];
                              const T coef = dot * inv[r] * inv[r] * inv[r] / static_cast<T>(k);
                              for (std::size_t c = 0; c < k; ++c) {
                                (*gx)[r * k + c] += inv[r] * gv[c] * gr[c] - xr[c] * coef;
                              }
                            }
                          }
                        });
}

template <typename T>
Tensor<T> rotary(const Tensor<T>& x, std::span<const double> positions, std::size_t heads,
                 double base) {
  require(x.rank() == 2, "rotary: expected [rows, heads*head_dim], got " + to_string(x.shape()));
  const std::size_t rows = x.dim(0), width = x.dim(1);
  require(heads > 0 && width % heads == 0, "rotary: width not divisible by head count");
  const std::size_t hd = width / heads;
  require(hd % 2 == 0, "rotary: head_dim must be even");
  require(positions.size() == rows, "rotary: one position per row required");
  const std::size_t half = hd / 2;
  // cos/sin table [rows, half], shared with the backward pass.
  std::vector<T> cs(rows * half), sn(rows * half);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(hd));
      const double ang = positions[r] * freq;
      cs[r * half + i] = static_cast<T>(std::cos(ang));
      sn[r * half + i] = static_cast<T>(std::sin(ang));
    }
  }
  std::vector<T> out(x.numel());
  const T* xv = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t o = r * width + h * hd;
      for (std::size_t i = 0; i < half; ++i) {
        const T c = cs[r * half + i], s = sn[r * half + i];
        const T a = xv[o + 2 * i], b = xv[o + 2 * i + 1];
        out[o + 2 * i] = a * c - b * s;
        out[o + 2 * i + 1] = a * s + b * c;
      }
    }
  }
  return make_result<T>(
      x.shape(), std::move(out), "rotary", {x},
      [rows, heads, hd, half, width, cs = std::move(cs), sn = std::move(sn)](Node<T>& self) {
        auto& gx = *input_grad(self, 0);
        const T* g = self.grad.data();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t o = r * width + h * hd;
            for (std::size_t i = 0; i < half; ++i) {
              const T c = cs[r * half + i], s = sn[r * half + i];
              const T ga = g[o + 2 * i], gb = g[o + 2 * i + 1];
              gx[o + 2 * i] += ga * c + gb * s;
              gx[o + 2 * i + 1] += -ga * s + gb * c;
            }
          }
        }
      });
}

#define HIBA_INSTANTIATE_OPS(T)                                                               \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> transpose(const Tensor<T>&);                                             \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> scale(const Tensor<T>&, T);                                              \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                         \
  template Tensor<T> concat(std::span<const Tensor<T>>, std::size_t);                         \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);          \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);             \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                        \
  template Tensor<T> softmax(const Tensor<T>&);                                               \
  template Tensor<T> masked_softmax(const Tensor<T>&, std::span<const std::uint8_t>);         \
  template Tensor<T> masked_fill(const Tensor<T>&, std::span<const std::uint8_t>, T);         \
  template Tensor<T> sigmoid(const Tensor<T>&);                                               \
  template Tensor<T> silu(const Tensor<T>&);                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                   \
  template Tensor<T> mean(const Tensor<T>&);                                                  \
  template Tensor<T> mean_last(const Tensor<T>&);                                             \
  template Tensor<T> std_last(const Tensor<T>&);                                              \
  template Tensor<T> rms_norm(const Tensor<T>&, const Tensor<T>&, T);                         \
  template Tensor<T> rotary(const Tensor<T>&, std::span<const double>, std::size_t, double);

HIBA_INSTANTIATE_OPS(float)
HIBA_INSTANTIATE_OPS(double)

#undef HIBA_INSTANTIATE_OPS

}  // namespace hiba::ad
