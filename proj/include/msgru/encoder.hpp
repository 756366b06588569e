#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "msgru/graph.hpp"
#include "msgru/rng.hpp"

// Multi-scale GRU: one cell consumes several feature vectors per timestep
// (primary, neighbor, remote patch) and tracks one fused hidden state plus one
// input-specific state per branch. For branch i with input x_i and previous
// fused state h:
//
//   r_i  = sigmoid(W_r^i x_i + U_r h + b_r^i)
//   z_i  = sigmoid(W_z^i x_i + U_z h + b_z^i)
//   c_i  = tanh(W_h^i x_i + U_h (r_i * h) + b_h^i)
//   h_i' = (1 - z_i) * h + z_i * c_i
//
// and the fused state mixes the input projections with learned scalars w_i:
//
//   r  = sigmoid(sum_i w_i (W_r^i x_i + b_r^i) + U_r h)
//   z  = sigmoid(sum_i w_i (W_z^i x_i + b_z^i) + U_z h)
//   c  = tanh(sum_i w_i (W_h^i x_i + b_h^i) + U_h (r * h))
//   h' = (1 - z) * h + z * c
//
// U_* are shared by every branch and the fused path. Only the fused state is
// carried to the next timestep.
namespace msgru::encoder {

using num::Graph;
using num::ParamStore;
using num::Tensor;
using num::Var;

enum class Gate : char { reset = 'r', update = 'z', candidate = 'h' };

struct MsGruConfig {
  std::size_t hidden = 32;
  std::size_t feature_dim = 256;
  /// 3 for primary/neighbor/remote; 2 drops the remote branch.
  std::size_t branches = 3;

  void validate() const;
};

std::string input_weight_name(std::size_t branch, Gate gate);  // branch counts from 1
std::string input_bias_name(std::size_t branch, Gate gate);
std::string recurrent_weight_name(Gate gate);
std::string fusion_weight_name(std::size_t branch);

/// Uniform(-1/sqrt(hidden), 1/sqrt(hidden)) weights, zero biases, fusion
/// scalars 1/branches.
void init_msgru(ParamStore& params, const MsGruConfig& config, Rng& rng);

struct MsGruState {
  Var h;                      // fused state
  std::vector<Var> branch_h;  // input-specific states, one per branch
  // Gate activations of this step, for inspection.
  std::vector<Var> branch_reset;
  std::vector<Var> branch_update;
  std::vector<Var> branch_candidate;
  Var reset;
  Var update;
  Var candidate;
};

MsGruState cell_forward(Graph& g, std::span<const Var> inputs, Var h_prev, const MsGruConfig& config);

/// Unrolls the cell over the slots of `inputs`. Slots with mask == false
/// copy the previous state unchanged and their inputs are never read (they
/// may be empty). The mask must be a non-empty valid prefix.
std::vector<MsGruState> encode_sequence(Graph& g, std::span<const std::vector<Var>> inputs,
                                        const std::vector<bool>& mask, Var h0, const MsGruConfig& config);

/// Number of leading valid slots; throws ContractError if the mask is empty,
/// starts with an invalid slot, or has a valid slot after an invalid one.
std::size_t valid_prefix(const std::vector<bool>& mask);

}  // namespace msgru::encoder
