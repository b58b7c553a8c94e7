#pragma once

#include <cmath>
#include <vector>

#include "lulcseg/nn/tensor.hpp"

namespace lulcseg::nn {

// Bias-corrected Adam. Learning rate lives here so the trainer can swap it
// between phases; beta/epsilon defaults follow the standard formulation.
template <typename T>
struct AdamState {
  int64_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;

  void init(const std::vector<Tensor4<T>>& params) {
    step = 0;
    first_moment.clear();
    second_moment.clear();
    for (const auto& p : params) {
      first_moment.emplace_back(p.size(), T(0));
      second_moment.emplace_back(p.size(), T(0));
    }
  }
};

template <typename T>
void adam_step(std::vector<Tensor4<T>>& params,
               const std::vector<Tensor4<T>>& grads, AdamState<T>& state) {
  require(params.size() == grads.size() &&
              params.size() == state.first_moment.size(),
          Errc::ShapeMismatch, "adam state does not match parameter list");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    require(params[i].size() == grads[i].size(), Errc::ShapeMismatch,
            "gradient dims disagree with parameter dims");
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto& p = params[i].v;
    const auto& g = grads[i].v;
    for (size_t k = 0; k < p.size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      const double mk = state.beta1 * m[k] + (1.0 - state.beta1) * gk;
      const double vk = state.beta2 * v[k] + (1.0 - state.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double m_hat = mk / bc1;
      const double v_hat = vk / bc2;
      p[k] = static_cast<T>(p[k] -
                            state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
  }
}

}  // namespace lulcseg::nn
