// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hiba::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

template <typename T>
struct Node;

/// Reads `self.grad` and accumulates into the grads of `self.inputs`.
template <typename T>
using BackwardFn = std::function<void(Node<T>& self)>;

/// One value in the computation graph. Leaves have no inputs; op results
/// hold their inputs and a backward rule only while grad recording is on.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t seq = 0;  // creation order, strictly increasing
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn<T> backward;

  [[nodiscard]] bool is_leaf() const { return inputs.empty(); }
  std::vector<T>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

/// Shared handle to a graph node. Copies alias the same storage.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Shape& shape() const { return node_->shape; }
  [[nodiscard]] std::size_t rank() const { return node_->shape.size(); }
  [[nodiscard]] std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  [[nodiscard]] std::size_t numel() const { return node_->data.size(); }

  [[nodiscard]] std::span<const T> data() const { return node_->data; }
  /// Writable storage; only meaningful for leaves (optimizer updates, loading).
  [[nodiscard]] std::span<T> mutable_data() { return node_->data; }
  [[nodiscard]] T item() const;
  [[nodiscard]] T at(std::size_t flat_index) const { return node_->data.at(flat_index); }

  [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on = true);
  [[nodiscard]] bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  /// Gradient; zeros of the right size when nothing has accumulated yet.
  [[nodiscard]] std::vector<T> grad() const;
  [[nodiscard]] std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad();

  /// Reverse-mode sweep from this scalar. Leaf grads accumulate across calls.
  void backward() const;

  /// Fresh leaf with a copy of the data and no history.
  [[nodiscard]] Tensor detach() const;

  [[nodiscard]] const char* op() const { return node_->op; }
  [[nodiscard]] Node<T>& node() const { return *node_; }
  [[nodiscard]] const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Ordered op records reachable from a root, in forward (creation) order.
template <typename T>
struct Graph {
  std::vector<Node<T>*> nodes;
};

template <typename T>
Graph<T> trace(const Tensor<T>& root);

/// Builds an op result. Records `inputs` and `backward` when grad mode is on
/// and any input requires grad; otherwise the result is a constant. Throws
/// NumericError if `data` contains NaN or Inf.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const char* op,
                      std::initializer_list<Tensor<T>> inputs, BackwardFn<T> backward);
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const char* op,
                      std::span<const Tensor<T>> inputs, BackwardFn<T> backward);

bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace hiba::ad
