// SPDX-License-Identifier: Apache-2.0
#include "hiba/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "hiba/errors.hpp"

namespace hiba::ad {

namespace {

std::atomic<std::uint64_t> g_next_seq{1};
thread_local bool t_grad_enabled = true;

template <typename T>
std::shared_ptr<Node<T>> new_node(Shape shape, std::vector<T> data) {
  require(numel(shape) == data.size(),
          "tensor: shape " + to_string(shape) + " does not hold " + std::to_string(data.size()) +
              " values");
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  return node;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = ad::numel(shape);
  return from(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> data, bool requires_grad) {
  auto node = new_node<T>(std::move(shape), std::move(data));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  require(numel() == 1, "item: tensor of shape " + to_string(shape()) + " is not a scalar");
  return node_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  require(node_->is_leaf(), "set_requires_grad: only leaves can be marked");
  node_->requires_grad = on;
  return *this;
}

template <typename T>
std::vector<T> Tensor<T>::grad() const {
  if (has_grad()) return node_->grad;
  return std::vector<T>(numel(), T(0));
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from(shape(), node_->data, false);
}

template <typename T>
Graph<T> trace(const Tensor<T>& root) {
  Graph<T> graph;
  if (!root.defined() || !root.requires_grad()) return graph;
  std::unordered_set<const Node<T>*> seen;
  std::vector<Node<T>*> stack{&root.node()};
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    graph.nodes.push_back(n);
    for (const auto& in : n->inputs) {
      if (in->requires_grad) stack.push_back(in.get());
    }
  }
  std::sort(graph.nodes.begin(), graph.nodes.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->seq < b->seq; });
  return graph;
}

template <typename T>
void Tensor<T>::backward() const {
  require(defined(), "backward: undefined tensor");
  require(numel() == 1, "backward: root must be a scalar, got shape " + to_string(shape()));
  require(requires_grad(), "backward: root is not on a graph (no input requires grad)");

  Graph<T> graph = trace(*this);
  for (Node<T>* n : graph.nodes) {
    if (!n->is_leaf()) n->grad.clear();
  }
  node_->ensure_grad()[0] += T(1);
  for (auto it = graph.nodes.rbegin(); it != graph.nodes.rend(); ++it) {
    Node<T>& n = **it;
    if (n.is_leaf() || !n.backward || n.grad.empty()) continue;
    n.backward(n);
  }
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const char* op,
                      std::span<const Tensor<T>> inputs, BackwardFn<T> backward) {
  for (const T v : data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by op '") + op + "'");
    }
  }
  auto node = new_node<T>(std::move(shape), std::move(data));
  node->op = op;
  if (t_grad_enabled) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor<T>& t) { return t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      for (const auto& t : inputs) node->inputs.push_back(t.node_ptr());
      node->backward = std::move(backward);
    }
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, const char* op,
                      std::initializer_list<Tensor<T>> inputs, BackwardFn<T> backward) {
  return make_result<T>(std::move(shape), std::move(data), op,
                        std::span<const Tensor<T>>(inputs.begin(), inputs.size()),
                        std::move(backward));
}

template class Tensor<float>;
template class Tensor<double>;
template Graph<float> trace(const Tensor<float>&);
template Graph<double> trace(const Tensor<double>&);
template Tensor<float> make_result(Shape, std::vector<float>, const char*,
                                   std::span<const Tensor<float>>, BackwardFn<float>);
template Tensor<double> make_result(Shape, std::vector<double>, const char*,
                                    std::span<const Tensor<double>>, BackwardFn<double>);
template Tensor<float> make_result(Shape, std::vector<float>, const char*,
                                   std::initializer_list<Tensor<float>>, BackwardFn<float>);
template Tensor<double> make_result(Shape, std::vector<double>, const char*,
                                    std::initializer_list<Tensor<double>>, BackwardFn<double>);

}  // namespace hiba::ad
