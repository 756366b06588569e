#pragma once

#include <span>
#include <vector>

#include "msgru/encoder.hpp"
#include "msgru/graph.hpp"

namespace msgru::corr {

using num::Graph;
using num::Var;

/// Stabiliser added under the square root of the Pearson denominator.
inline constexpr double kPearsonEpsilon = 1e-8;

/// rho = sum (u-mean u)(v-mean v) / sqrt(sum (u-mean u)^2 * sum (v-mean v)^2 + eps).
/// A constant argument gives rho = 0. Throws ContractError when n < 2.
double pearson(std::span<const double> u, std::span<const double> v);
/// Differentiable in both arguments -> [1].
Var pearson(Var u, Var v);

/// Per-timepoint correlations between the primary-branch state and the
/// neighbor (pn) and remote (pr) branch states, plus their means over valid
/// timepoints.
struct CorrTerm {
  std::vector<double> rho_pn;
  std::vector<double> rho_pr;
  double mean_pn = 0.0;
  double mean_pr = 0.0;
};

CorrTerm correlation_terms(std::span<const encoder::MsGruState> states, const std::vector<bool>& mask);

/// mean over valid t of [ -rho(h1_t, h2_t) + rho(h1_t, h3_t) ]. Minimising
/// it pulls primary/neighbor states together and pushes primary/remote
/// apart. Needs three branches and at least one valid timepoint.
Var correlation_loss(Graph& g, std::span<const encoder::MsGruState> states, const std::vector<bool>& mask);

}  // namespace msgru::corr
