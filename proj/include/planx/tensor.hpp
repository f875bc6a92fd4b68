#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace planx {

// 64-byte aligned storage keeps vectorized kernel behavior identical from
// run to run regardless of heap layout.
template <typename T>
struct AlignedAlloc {
  using value_type = T;
  AlignedAlloc() = default;
  template <typename U>
  AlignedAlloc(const AlignedAlloc<U>&) {}
  T* allocate(std::size_t n) {
    void* p = std::aligned_alloc(64, ((n * sizeof(T) + 63) / 64) * 64);
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) { std::free(p); }
  template <typename U>
  bool operator==(const AlignedAlloc<U>&) const { return true; }
};

template <typename T>
using AVec = std::vector<T, AlignedAlloc<T>>;

bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }
  bool prev_;
};

template <typename T>
struct Tensor;

template <typename T>
struct Node {
  std::vector<Tensor<T>> parents;
  std::function<void(Tensor<T>&)> backward;
};

std::size_t numel_of(const std::vector<int>& shape);

template <typename T>
struct Tensor {
  std::shared_ptr<AVec<T>> data;
  std::vector<int> shape;
  bool requires_grad = false;
  std::shared_ptr<AVec<T>> grad;
  std::shared_ptr<Node<T>> node;

  Tensor() = default;

  static Tensor zeros(const std::vector<int>& shape, bool requires_grad = false) {
    Tensor t;
    t.shape = shape;
    t.data = std::make_shared<AVec<T>>(numel_of(shape), T(0));
    t.requires_grad = requires_grad && grad_enabled();
    if (t.requires_grad) t.grad = std::make_shared<AVec<T>>(t.data->size(), T(0));
    return t;
  }

  static Tensor full(const std::vector<int>& shape, T value, bool requires_grad = false) {
    Tensor t = zeros(shape, requires_grad);
    for (auto& x : *t.data) x = value;
    return t;
  }

  static Tensor from_vector(const std::vector<int>& shape, const std::vector<T>& values,
                            bool requires_grad = false) {
    if (values.size() != numel_of(shape)) throw std::invalid_argument("from_vector: size mismatch");
    Tensor t = zeros(shape, requires_grad);
    std::copy(values.begin(), values.end(), t.data->begin());
    return t;
  }

  static Tensor scalar(T value) { return full({1}, value); }

  std::size_t numel() const { return data ? data->size() : 0; }
  bool defined() const { return static_cast<bool>(data); }

  T* ptr() { return data->data(); }
  const T* ptr() const { return data->data(); }
  T* grad_ptr() { return grad ? grad->data() : nullptr; }

  T item() const {
    if (numel() != 1) throw std::runtime_error("item: tensor is not scalar");
    return (*data)[0];
  }

  void ensure_grad() {
    if (!grad) grad = std::make_shared<AVec<T>>(data->size(), T(0));
  }

  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), T(0));
  }

  // Reverse-mode sweep from a scalar root. Node order is a fixed topological
  // order of the recorded tape, so accumulation order is reproducible.
  void backward();
};

extern template struct Tensor<float>;
extern template struct Tensor<double>;

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace planx
