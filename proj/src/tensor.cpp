#include "planx/tensor.hpp"

#include <unordered_set>

namespace planx {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

std::size_t numel_of(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

template <typename T>
void Tensor<T>::backward() {
  if (numel() != 1) throw std::runtime_error("backward: root must be scalar");
  ensure_grad();
  (*grad)[0] = T(1);
  if (!node) return;

  // Iterative post-order DFS over the tape.
  std::vector<Tensor<T>> topo;
  std::unordered_set<Node<T>*> visited;
  struct Frame {
    Tensor<T> t;
    std::size_t next_child = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({*this, 0});
  visited.insert(node.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    Node<T>* n = f.t.node.get();
    if (f.next_child < n->parents.size()) {
      Tensor<T>& child = n->parents[f.next_child++];
      if (child.node && !visited.count(child.node.get())) {
        visited.insert(child.node.get());
        stack.push_back({child, 0});
      }
    } else {
      topo.push_back(f.t);
      stack.pop_back();
    }
  }

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Tensor<T>& t = *it;
    for (auto& p : t.node->parents) {
      if (p.requires_grad && !p.grad) throw std::runtime_error("backward: parent grad missing");
    }
    t.node->backward(t);
  }
}

template struct Tensor<float>;
template struct Tensor<double>;

}  // namespace planx
