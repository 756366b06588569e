#include "msgru/corrloss.hpp"

#include <cmath>

#include "msgru/error.hpp"
#include "msgru/ops.hpp"

namespace msgru::corr {

namespace {

struct Moments {
  std::vector<double> a, b;  // centred inputs
  double sab = 0, saa = 0, sbb = 0;
};

Moments centred(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DimensionError("pearson: length mismatch " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  if (u.size() < 2) throw ContractError("pearson needs at least two elements");
  const double n = static_cast<double>(u.size());
  double mu = 0, mv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= n;
  mv /= n;
  Moments m;
  m.a.resize(u.size());
  m.b.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    m.a[i] = u[i] - mu;
    m.b[i] = v[i] - mv;
    m.sab += m.a[i] * m.b[i];
    m.saa += m.a[i] * m.a[i];
    m.sbb += m.b[i] * m.b[i];
  }
  return m;
}

}  // namespace

double pearson(std::span<const double> u, std::span<const double> v) {
  const Moments m = centred(u, v);
  return m.sab / std::sqrt(m.saa * m.sbb + kPearsonEpsilon);
}

Var pearson(Var u, Var v) {
  if (u.shape().size() != 1 || v.shape().size() != 1) throw DimensionError("pearson expects rank-1 tensors");
  Moments m = centred(u.value().values(), v.value().values());
  const double d = std::sqrt(m.saa * m.sbb + kPearsonEpsilon);
  const double rho = m.sab / d;
  // Centring is absorbed: a and b already have zero mean, so d(sab)/du_i = b_i.
  return u.graph().record("pearson", {u, v}, num::Tensor::scalar(rho),
                          [m = std::move(m), d](const num::Tensor& g, std::span<num::Tensor* const> gin) {
                            const double d3 = d * d * d;
                            if (gin[0])
                              for (std::size_t i = 0; i < m.a.size(); ++i)
                                (*gin[0])[i] += g[0] * (m.b[i] / d - m.sab * m.sbb * m.a[i] / d3);
                            if (gin[1])
                              for (std::size_t i = 0; i < m.b.size(); ++i)
                                (*gin[1])[i] += g[0] * (m.a[i] / d - m.sab * m.saa * m.b[i] / d3);
                          });
}

CorrTerm correlation_terms(std::span<const encoder::MsGruState> states, const std::vector<bool>& mask) {
  if (states.size() != mask.size()) throw ContractError("correlation terms: mask length differs from states");
  const std::size_t valid = encoder::valid_prefix(mask);
  CorrTerm out;
  for (std::size_t t = 0; t < valid; ++t) {
    const auto& s = states[t];
    if (s.branch_h.size() < 3) throw ContractError("correlation terms need three branches");
    out.rho_pn.push_back(pearson(s.branch_h[0].value().values(), s.branch_h[1].value().values()));
    out.rho_pr.push_back(pearson(s.branch_h[0].value().values(), s.branch_h[2].value().values()));
    out.mean_pn += out.rho_pn.back();
    out.mean_pr += out.rho_pr.back();
  }
  out.mean_pn /= static_cast<double>(valid);
  out.mean_pr /= static_cast<double>(valid);
  return out;
}

Var correlation_loss(Graph& g, std::span<const encoder::MsGruState> states, const std::vector<bool>& mask) {
  if (states.size() != mask.size()) throw ContractError("correlation_loss: mask length differs from states");
  const std::size_t valid = encoder::valid_prefix(mask);
  Var total;
  for (std::size_t t = 0; t < valid; ++t) {
    const auto& s = states[t];
    if (s.branch_h.size() < 3) throw ContractError("correlation_loss needs the remote branch");
    const Var term = num::sub(pearson(s.branch_h[0], s.branch_h[2]), pearson(s.branch_h[0], s.branch_h[1]));
    total = t == 0 ? term : num::add(total, term);
  }
  return num::scale(g.constant(num::Tensor::scalar(1.0 / static_cast<double>(valid))), total);
}

}  // namespace msgru::corr
