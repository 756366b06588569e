#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "msgru/graph.hpp"
#include "msgru/rng.hpp"

namespace testing {

using msgru::num::Graph;
using msgru::num::ParamStore;
using msgru::num::Tensor;
using msgru::num::Var;

inline Tensor random_tensor(msgru::num::Shape shape, msgru::Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = msgru::uniform(rng, lo, hi);
  return t;
}

inline double loss_at(const std::function<Var(Graph&)>& build, const ParamStore& params) {
  Graph g(&params);
  return build(g).value().item();
}

// Independent central-difference oracle: max relative error between the
// tape gradient and (f(p+e) - f(p-e)) / 2e over every coordinate.
inline double max_fd_error(const std::function<Var(Graph&)>& build, ParamStore params, double eps = 1e-6) {
  msgru::num::GradMap analytic;
  {
    Graph g(&params);
    analytic = g.backward(build(g));
  }
  double worst = 0.0;
  for (auto& [name, t] : params) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t[i];
      t[i] = saved + eps;
      const double up = loss_at(build, params);
      t[i] = saved - eps;
      const double down = loss_at(build, params);
      t[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic.at(name)[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace testing
