#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "msgru/graph.hpp"

namespace msgru::num {

struct AdamState {
  std::size_t step = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of every parameter that has a gradient in
/// `grads`. Moment tensors are created on first use.
void adam_step(ParamStore& params, const GradMap& grads, AdamState& state, double lr);

}  // namespace msgru::num
