#include "planx/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace planx {

AdamW::AdamW(ParamRegistry& params, AdamWConfig cfg) : params_(params), cfg_(cfg) {
  m_.resize(params.entries.size());
  v_.resize(params.entries.size());
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    m_[i].assign(params.entries[i].tensor.numel(), 0.0f);
    v_[i].assign(params.entries[i].tensor.numel(), 0.0f);
  }
}

void AdamW::step() {
  ++step_count_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (std::size_t pi = 0; pi < params_.entries.size(); ++pi) {
    auto& e = params_.entries[pi];
    if (!e.tensor.requires_grad || !e.tensor.grad) continue;
    float* p = e.tensor.ptr();
    const float* g = e.tensor.grad->data();
    float* m = m_[pi].data();
    float* v = v_[pi].data();
    const std::size_t n = e.tensor.numel();
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(g[i]))
        throw std::runtime_error("adamw: non-finite gradient in parameter '" + e.name + "'");
      m[i] = static_cast<float>(b1 * m[i] + (1.0 - b1) * g[i]);
      v[i] = static_cast<float>(b2 * v[i] + (1.0 - b2) * g[i] * g[i]);
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      double update = mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p[i];
      p[i] = static_cast<float>(p[i] - cfg_.lr * update);
    }
  }
}

double grad_check(const std::function<TensorD(std::vector<TensorD>&)>& f,
                  std::vector<TensorD> inputs, double eps) {
  for (auto& in : inputs) {
    in.requires_grad = true;
    in.ensure_grad();
    in.zero_grad();
    in.node.reset();
  }
  TensorD loss = f(inputs);
  if (loss.numel() != 1) throw std::invalid_argument("grad_check: function must be scalar-valued");
  loss.backward();

  double max_rel = 0.0;
  for (auto& in : inputs) {
    for (std::size_t i = 0; i < in.numel(); ++i) {
      double orig = (*in.data)[i];
      (*in.data)[i] = orig + eps;
      double up;
      {
        NoGradGuard ng;
        up = f(inputs).item();
      }
      (*in.data)[i] = orig - eps;
      double down;
      {
        NoGradGuard ng;
        down = f(inputs).item();
      }
      (*in.data)[i] = orig;
      double fd = (up - down) / (2.0 * eps);
      double an = (*in.grad)[i];
      double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      max_rel = std::max(max_rel, std::abs(fd - an) / denom);
    }
  }
  return max_rel;
}

}  // namespace planx
