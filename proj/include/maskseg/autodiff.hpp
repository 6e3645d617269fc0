#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "maskseg/tensor.hpp"

namespace maskseg {

// One value in a reverse-mode graph. Nodes that do not require gradients keep
// no inputs or backward closure, so inference graphs hold no history.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until first accumulated into
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
  // Hash of the branch taken by non-smooth ops (relu sign, pooling argmax).
  std::uint64_t pattern = 0;

  Tensor<T>& grad_buffer() {
    if (grad.empty() && !value.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return n;
}

template <typename T>
Var<T> parameter(Tensor<T> value) {
  auto n = constant(std::move(value));
  n->requires_grad = true;
  return n;
}

template <typename T>
Var<T> make_node(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward_fn,
                 std::uint64_t pattern = 0) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->pattern = pattern;
  for (const auto& in : inputs) n->requires_grad = n->requires_grad || in->requires_grad;
  if (n->requires_grad) {
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

// Accumulates d(sum of root)/d(node) into every reachable node's grad.
template <typename T>
void backward(const Var<T>& root);

// Combined pattern of every node reachable from root.
template <typename T>
std::uint64_t graph_pattern(const Var<T>& root);

template <typename T>
void zero_grad(const std::vector<Var<T>>& params) {
  for (const auto& p : params) p->grad = Tensor<T>();
}

}  // namespace maskseg
