#include "mmcd/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mmcd::grad {

template <typename T>
void adam_step(const std::vector<TensorPtr<T>>& params,
               const std::vector<std::vector<T>>& grads, AdamState<T>& state, T lr) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: group size mismatch");
  if (!(lr > T(0))) throw std::invalid_argument("adam_step: learning rate must be positive");
  if (state.m.size() != params.size()) state.init(params);

  for (size_t k = 0; k < params.size(); ++k) {
    if (grads[k].size() != params[k]->numel())
      throw std::invalid_argument("adam_step: gradient shape mismatch at group index " + std::to_string(k));
    for (size_t i = 0; i < grads[k].size(); ++i)
      if (!std::isfinite(static_cast<double>(grads[k][i])))
        throw std::runtime_error("adam_step: non-finite gradient at parameter " + std::to_string(k) +
                                 ", element " + std::to_string(i));
  }

  state.t += 1;
  const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(state.beta1), static_cast<double>(state.t)));
  const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(state.beta2), static_cast<double>(state.t)));

  for (size_t k = 0; k < params.size(); ++k) {
    auto& theta = params[k]->v;
    auto& m = state.m[k];
    auto& v = state.v[k];
    const auto& g = grads[k];
    const long long nel = static_cast<long long>(theta.size());
#pragma omp parallel for schedule(static) if (nel > 16384)
    for (long long i = 0; i < nel; ++i) {
      m[i] = state.beta1 * m[i] + (T(1) - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (T(1) - state.beta2) * g[i] * g[i];
      const T mhat = m[i] / bc1;
      T vhat = v[i] / bc2;
      if (state.amsgrad) {
        auto& vm = state.vmax[k];
        if (vhat > vm[i]) vm[i] = vhat;
        vhat = vm[i];
      }
      theta[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

template void adam_step<float>(const std::vector<TensorPtr<float>>&,
                               const std::vector<std::vector<float>>&, AdamState<float>&, float);
template void adam_step<double>(const std::vector<TensorPtr<double>>&,
                                const std::vector<std::vector<double>>&, AdamState<double>&, double);

}  // namespace mmcd::grad
