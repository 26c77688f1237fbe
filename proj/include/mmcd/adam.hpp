#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mmcd/tensor.hpp"

namespace mmcd::grad {

// Adam moment state for a fixed group of parameter tensors. The AMSGrad
// max-correction is available behind a flag and off by default.
template <typename T>
struct AdamState {
  std::int64_t t = 0;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-7);
  bool amsgrad = false;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::vector<std::vector<T>> vmax;

  void init(const std::vector<TensorPtr<T>>& params) {
    m.clear();
    v.clear();
    vmax.clear();
    for (const auto& p : params) {
      m.emplace_back(p->numel(), T(0));
      v.emplace_back(p->numel(), T(0));
      if (amsgrad) vmax.emplace_back(p->numel(), T(0));
    }
    t = 0;
  }
};

// One bias-corrected Adam update over a parameter group. `grads[k]` pairs with
// `params[k]`; a non-finite gradient aborts the step before any parameter is
// touched.
template <typename T>
void adam_step(const std::vector<TensorPtr<T>>& params,
               const std::vector<std::vector<T>>& grads, AdamState<T>& state, T lr);

struct LrSchedule {
  double base_rate = 1e-4;
  double decay_rate = 0.96;
  int decay_every = 1;
};

// base * decay^floor(epoch / every), staircase.
inline double schedule_rate(const LrSchedule& s, int epoch) {
  return s.base_rate * std::pow(s.decay_rate, epoch / s.decay_every);
}

}  // namespace mmcd::grad
