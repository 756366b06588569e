#include "msgru/encoder.hpp"

#include <cmath>

#include "msgru/error.hpp"
#include "msgru/ops.hpp"

namespace msgru::encoder {

namespace {

constexpr Gate kGates[] = {Gate::reset, Gate::update, Gate::candidate};

char gate_char(Gate g) { return static_cast<char>(g); }

}  // namespace

void MsGruConfig::validate() const {
  if (hidden == 0 || feature_dim == 0) throw ConfigError("hidden and feature_dim must be positive");
  if (branches < 1 || branches > 3) throw ConfigError("multi-scale cell supports 1 to 3 branches");
}

std::string input_weight_name(std::size_t branch, Gate gate) {
  return "enc.W" + std::to_string(branch) + "." + gate_char(gate);
}
std::string input_bias_name(std::size_t branch, Gate gate) {
  return "enc.b" + std::to_string(branch) + "." + gate_char(gate);
}
std::string recurrent_weight_name(Gate gate) { return std::string("enc.U.") + gate_char(gate); }
std::string fusion_weight_name(std::size_t branch) { return "enc.w" + std::to_string(branch); }

void init_msgru(ParamStore& params, const MsGruConfig& config, Rng& rng) {
  config.validate();
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  auto fill = [&](Tensor t) {
    for (auto& v : t.values()) v = uniform(rng, -bound, bound);
    return t;
  };
  for (Gate gate : kGates) {
    params[recurrent_weight_name(gate)] = fill(Tensor({config.hidden, config.hidden}));
  }
  for (std::size_t b = 1; b <= config.branches; ++b) {
    for (Gate gate : kGates) {
      params[input_weight_name(b, gate)] = fill(Tensor({config.hidden, config.feature_dim}));
      params[input_bias_name(b, gate)] = Tensor::zeros({config.hidden});
    }
    params[fusion_weight_name(b)] = Tensor::scalar(1.0 / static_cast<double>(config.branches));
  }
}

MsGruState cell_forward(Graph& g, std::span<const Var> inputs, Var h_prev, const MsGruConfig& config) {
  if (inputs.size() != config.branches) {
    throw DimensionError("cell_forward: expected " + std::to_string(config.branches) + " inputs, got " +
                         std::to_string(inputs.size()));
  }
  if (h_prev.shape() != num::Shape{config.hidden}) {
    throw DimensionError("cell_forward: previous state has shape " + num::to_string(h_prev.shape()));
  }
  for (const auto& x : inputs) {
    if (x.shape() != num::Shape{config.feature_dim}) {
      throw DimensionError("cell_forward: input has shape " + num::to_string(x.shape()) + ", expected [" +
                           std::to_string(config.feature_dim) + "]");
    }
  }

  const Var ur_h = num::matvec(g.parameter(recurrent_weight_name(Gate::reset)), h_prev);
  const Var uz_h = num::matvec(g.parameter(recurrent_weight_name(Gate::update)), h_prev);
  const Var u_h = g.parameter(recurrent_weight_name(Gate::candidate));

  MsGruState s;
  Var fused_r, fused_z, fused_c;
  for (std::size_t b = 1; b <= config.branches; ++b) {
    const Var& x = inputs[b - 1];
    auto project = [&](Gate gate) {
      return num::add(num::matvec(g.parameter(input_weight_name(b, gate)), x), g.parameter(input_bias_name(b, gate)));
    };
    const Var pr = project(Gate::reset);
    const Var pz = project(Gate::update);
    const Var pc = project(Gate::candidate);

    const Var r = num::sigmoid(num::add(pr, ur_h));
    const Var z = num::sigmoid(num::add(pz, uz_h));
    const Var c = num::tanh(num::add(pc, num::matvec(u_h, num::mul(r, h_prev))));
    s.branch_reset.push_back(r);
    s.branch_update.push_back(z);
    s.branch_candidate.push_back(c);
    s.branch_h.push_back(num::add(num::mul(num::one_minus(z), h_prev), num::mul(z, c)));

    const Var w = g.parameter(fusion_weight_name(b));
    const Var wr = num::scale(w, pr);
    const Var wz = num::scale(w, pz);
    const Var wc = num::scale(w, pc);
    fused_r = b == 1 ? wr : num::add(fused_r, wr);
    fused_z = b == 1 ? wz : num::add(fused_z, wz);
    fused_c = b == 1 ? wc : num::add(fused_c, wc);
  }

  s.reset = num::sigmoid(num::add(fused_r, ur_h));
  s.update = num::sigmoid(num::add(fused_z, uz_h));
  s.candidate = num::tanh(num::add(fused_c, num::matvec(u_h, num::mul(s.reset, h_prev))));
  s.h = num::add(num::mul(num::one_minus(s.update), h_prev), num::mul(s.update, s.candidate));
  return s;
}

std::size_t valid_prefix(const std::vector<bool>& mask) {
  if (mask.empty() || !mask.front()) throw ContractError("sequence has no valid timepoint");
  std::size_t n = 0;
  while (n < mask.size() && mask[n]) ++n;
  for (std::size_t i = n; i < mask.size(); ++i) {
    if (mask[i]) throw ContractError("mask must be a valid prefix followed by padding");
  }
  return n;
}

std::vector<MsGruState> encode_sequence(Graph& g, std::span<const std::vector<Var>> inputs,
                                        const std::vector<bool>& mask, Var h0, const MsGruConfig& config) {
  if (inputs.empty()) throw ContractError("encode_sequence: empty sequence");
  if (mask.size() != inputs.size()) throw ContractError("encode_sequence: mask length differs from sequence length");
  const std::size_t valid = valid_prefix(mask);
  std::vector<MsGruState> states;
  states.reserve(inputs.size());
  Var h = h0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (t >= valid) {
      states.push_back(states.back());
      continue;
    }
    states.push_back(cell_forward(g, inputs[t], h, config));
    h = states.back().h;
  }
  return states;
}

}  // namespace msgru::encoder
