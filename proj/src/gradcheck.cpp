#include "msgru/gradcheck.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "msgru/error.hpp"
#include "msgru/rng.hpp"

namespace msgru::num {

namespace {

double evaluate(const LossBuilder& build, const ParamStore& params) {
  Graph g(&params);
  return build(g).value().item();
}

bool selected(const std::string& name, const std::vector<std::string>& prefixes) {
  if (prefixes.empty()) return true;
  return std::any_of(prefixes.begin(), prefixes.end(), [&](const auto& p) { return name.starts_with(p); });
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& build, ParamStore& params, const GradCheckOptions& options) {
  if (!(options.epsilon >= 1e-7 && options.epsilon <= 1e-3)) {
    throw ContractError("grad_check: epsilon must lie in [1e-7, 1e-3]");
  }

  GradMap analytic;
  double base = 0.0;
  {
    Graph g(&params);
    Var loss = build(g);
    base = loss.value().item();
    analytic = g.backward(loss);
  }
  if (std::bit_cast<std::uint64_t>(evaluate(build, params)) != std::bit_cast<std::uint64_t>(base)) {
    throw ContractError("grad_check: loss builder is not deterministic");
  }

  Rng rng = make_rng(options.sample_seed);
  GradCheckResult result;
  for (auto& [name, tensor] : params) {
    if (!selected(name, options.prefixes)) continue;
    if (std::find(options.exclude.begin(), options.exclude.end(), name) != options.exclude.end()) continue;
    std::vector<std::size_t> coords(tensor.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_param != 0 && coords.size() > options.max_coords_per_param) {
      // partial Fisher-Yates
      for (std::size_t i = 0; i < options.max_coords_per_param; ++i) {
        std::swap(coords[i], coords[i + uniform_index(rng, coords.size() - i)]);
      }
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    const Tensor& grad = analytic.at(name);
    for (std::size_t idx : coords) {
      const double saved = tensor[idx];
      tensor[idx] = saved + options.epsilon;
      const double plus = evaluate(build, params);
      tensor[idx] = saved - options.epsilon;
      const double minus = evaluate(build, params);
      tensor[idx] = saved;

      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      const double a = grad[idx] * (1.0 + options.corrupt_analytic);
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.coords_checked;
      if (result.worst_param.empty() || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = name;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace msgru::num
