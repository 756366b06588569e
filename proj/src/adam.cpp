#include "msgru/adam.hpp"

#include <cmath>

#include "msgru/error.hpp"

namespace msgru::num {

void adam_step(ParamStore& params, const GradMap& grads, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw ContractError("adam_step: learning rate must be positive");
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("adam_step: gradient for unknown parameter '" + name + "'");
    require_same_shape(it->second.shape(), g.shape(), "adam_step");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto [mit, m_new] = state.m.try_emplace(name, Tensor::zeros(p.shape()));
    auto [vit, v_new] = state.v.try_emplace(name, Tensor::zeros(p.shape()));
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    require_same_shape(m.shape(), p.shape(), "adam_step moments");
    for (std::size_t i = 0; i < p.numel(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace msgru::num
