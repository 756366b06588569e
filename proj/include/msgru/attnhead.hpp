#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "msgru/graph.hpp"
#include "msgru/rng.hpp"

namespace msgru::attn {

using num::Graph;
using num::ParamStore;
using num::Tensor;
using num::Var;

inline constexpr std::size_t kGrades = 3;

inline const std::string kScoreWeight = "attn.score.weight";
inline const std::string kScoreBias = "attn.score.bias";

/// Linear scorer score_t = a . h_t + b.
void init_attention(ParamStore& params, std::size_t hidden, Rng& rng);

struct ContextVector {
  Var context;             // [hidden]
  Var weights;             // [valid slots], the softmax over valid slots only
  std::vector<bool> mask;  // slot validity the weights refer to

  /// Weights spread back over every slot, 0 on masked slots.
  Tensor slot_weights() const;
};

/// Softmax attention over the valid slots (masked slots take no part, which
/// is the same as a score of -infinity). Any mask with at least one valid slot
/// is accepted.
ContextVector attention_context(Graph& g, std::span<const Var> states, const std::vector<bool>& mask);
/// Equal weight on every valid slot.
ContextVector mean_context(Graph& g, std::span<const Var> states, const std::vector<bool>& mask);
/// All weight on the last valid slot.
ContextVector final_state_context(Graph& g, std::span<const Var> states, const std::vector<bool>& mask);

/// Standard GRU cell (input = context, state = h_init) followed by a linear
/// classifier over the three grades.
std::string decoder_weight_name(char gate);     // 'r', 'z', 'h'
std::string decoder_recurrent_name(char gate);
std::string decoder_bias_name(char gate);
inline const std::string kClassifierWeight = "dec.cls.weight";
inline const std::string kClassifierBias = "dec.cls.bias";

void init_decoder(ParamStore& params, std::size_t hidden, Rng& rng);

struct DecoderOutput {
  Var state;   // decoder hidden state after one step
  Var logits;  // [3]
  Var probs;   // [3]
};

using GradeDistribution = std::array<double, kGrades>;

DecoderOutput decode(Graph& g, Var context, Var h_init, std::size_t hidden);
GradeDistribution distribution(const DecoderOutput& out);
/// Most probable grade; exact ties go to the higher grade.
int predicted_grade(const GradeDistribution& p);

/// Modal grade of exactly 16 patch predictions; ties go to the higher grade.
int majority_vote(std::span<const int> grades);

}  // namespace msgru::attn
