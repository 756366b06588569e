#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "msgru/graph.hpp"

namespace msgru::num {

/// Builds the scalar loss on a fresh graph bound to the given store.
using LossBuilder = std::function<Var(Graph&)>;

struct GradCheckOptions {
  double epsilon = 1e-6;
  /// Upper bound on coordinates checked per parameter tensor; 0 checks all.
  /// Sampled coordinates are drawn from `sample_seed`.
  std::size_t max_coords_per_param = 0;
  std::uint64_t sample_seed = 0;
  /// Only parameters whose name starts with one of these prefixes (empty: all).
  std::vector<std::string> prefixes;
  /// Parameters skipped by exact name, e.g. ones whose gradient is identically zero.
  std::vector<std::string> exclude;
  /// Test hook: multiplies analytic gradients by (1 + corrupt_analytic).
  double corrupt_analytic = 0.0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
};

/// Compares reverse-mode gradients with central differences
/// (f(p+e) - f(p-e)) / 2e coordinate by coordinate. The error for one
/// coordinate is |a - n| / max(|a|, |n|, 1e-8). `params` is perturbed in place
/// and restored before returning. Throws ContractError if two evaluations at
/// the same point disagree.
GradCheckResult grad_check(const LossBuilder& build, ParamStore& params, const GradCheckOptions& options = {});

}  // namespace msgru::num
