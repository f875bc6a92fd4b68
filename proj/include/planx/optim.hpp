#pragma once

#include <functional>
#include <string>
#include <vector>

#include "planx/tensor.hpp"

namespace planx {

// Named trainable tensors in a fixed order; the order defines the
// deterministic update sequence and the checkpoint layout.
struct ParamRegistry {
  struct Entry {
    std::string name;
    TensorF tensor;
  };
  std::vector<Entry> entries;

  TensorF& add(const std::string& name, TensorF t) {
    entries.push_back({name, std::move(t)});
    return entries.back().tensor;
  }
  void zero_grad() {
    for (auto& e : entries) e.tensor.zero_grad();
  }
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.tensor.numel();
    return n;
  }
  Entry* find(const std::string& name) {
    for (auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay with bias correction. Throws (with the parameter
// name) on a non-finite gradient.
class AdamW {
 public:
  AdamW(ParamRegistry& params, AdamWConfig cfg);

  void step();
  long long step_count() const { return step_count_; }
  AdamWConfig& config() { return cfg_; }

 private:
  ParamRegistry& params_;
  AdamWConfig cfg_;
  long long step_count_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

// Max relative error between reverse-mode gradients and central finite
// differences of a scalar-valued function, evaluated in 64-bit.
double grad_check(const std::function<TensorD(std::vector<TensorD>&)>& f,
                  std::vector<TensorD> inputs, double eps = 1e-5);

}  // namespace planx
