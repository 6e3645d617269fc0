#include "maskseg/autodiff.hpp"

#include <unordered_set>

namespace maskseg {
namespace {

template <typename T>
std::vector<Node<T>*> topo_order(const Var<T>& root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // inputs before consumers
}

}  // namespace

template <typename T>
void backward(const Var<T>& root) {
  if (!root->requires_grad) return;
  const auto order = topo_order(root);
  root->grad_buffer().fill(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

template <typename T>
std::uint64_t graph_pattern(const Var<T>& root) {
  std::uint64_t h = 0;
  std::uint64_t k = 0;
  for (const Node<T>* n : topo_order(root)) {
    h ^= (n->pattern + 0x9E3779B97F4A7C15ULL * ++k) * 0xBF58476D1CE4E5B9ULL;
  }
  return h;
}

template void backward<float>(const Var<float>&);
template void backward<double>(const Var<double>&);
template std::uint64_t graph_pattern<float>(const Var<float>&);
template std::uint64_t graph_pattern<double>(const Var<double>&);

}  // namespace maskseg
