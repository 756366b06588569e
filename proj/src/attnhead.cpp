#include "msgru/attnhead.hpp"

#include <cmath>

#include "msgru/error.hpp"
#include "msgru/ops.hpp"

namespace msgru::attn {

namespace {

std::vector<std::size_t> valid_slots(std::span<const Var> states, const std::vector<bool>& mask) {
  if (states.size() != mask.size()) throw ContractError("context: mask length differs from state count");
  std::vector<std::size_t> slots;
  for (std::size_t t = 0; t < mask.size(); ++t)
    if (mask[t]) slots.push_back(t);
  if (slots.empty()) throw ContractError("context: every slot is masked");
  return slots;
}

ContextVector weighted(Graph& g, std::span<const Var> states, const std::vector<bool>& mask,
                       const std::vector<std::size_t>& slots, Var weights) {
  ContextVector out;
  out.weights = weights;
  out.mask = mask;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const Var term = num::scale(num::pick(weights, k), states[slots[k]]);
    out.context = k == 0 ? term : num::add(out.context, term);
  }
  (void)g;
  return out;
}

}  // namespace

Tensor ContextVector::slot_weights() const {
  Tensor out({mask.size()});
  std::size_t k = 0;
  for (std::size_t t = 0; t < mask.size(); ++t) out[t] = mask[t] ? weights.value()[k++] : 0.0;
  return out;
}

void init_attention(ParamStore& params, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  Tensor a({hidden});
  for (auto& v : a.values()) v = uniform(rng, -bound, bound);
  params[kScoreWeight] = std::move(a);
  params[kScoreBias] = Tensor::zeros({1});
}

ContextVector attention_context(Graph& g, std::span<const Var> states, const std::vector<bool>& mask) {
  const auto slots = valid_slots(states, mask);
  const Var a = g.parameter(kScoreWeight);
  const Var b = g.parameter(kScoreBias);
  std::vector<Var> scores;
  scores.reserve(slots.size());
  for (auto t : slots) scores.push_back(num::add(num::dot(a, states[t]), b));
  return weighted(g, states, mask, slots, num::softmax(num::concat(scores)));
}

ContextVector mean_context(Graph& g, std::span<const Var> states, const std::vector<bool>& mask) {
  const auto slots = valid_slots(states, mask);
  const Var w = g.constant(Tensor::filled({slots.size()}, 1.0 / static_cast<double>(slots.size())));
  return weighted(g, states, mask, slots, w);
}

ContextVector final_state_context(Graph& g, std::span<const Var> states, const std::vector<bool>& mask) {
  const auto slots = valid_slots(states, mask);
  ContextVector out;
  out.mask = mask;
  Tensor w({slots.size()});
  w[slots.size() - 1] = 1.0;
  out.weights = g.constant(std::move(w));
  out.context = states[slots.back()];
  return out;
}

std::string decoder_weight_name(char gate) { return std::string("dec.W.") + gate; }
std::string decoder_recurrent_name(char gate) { return std::string("dec.U.") + gate; }
std::string decoder_bias_name(char gate) { return std::string("dec.b.") + gate; }

void init_decoder(ParamStore& params, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  auto fill = [&](Tensor t) {
    for (auto& v : t.values()) v = uniform(rng, -bound, bound);
    return t;
  };
  for (char gate : {'r', 'z', 'h'}) {
    params[decoder_weight_name(gate)] = fill(Tensor({hidden, hidden}));
    params[decoder_recurrent_name(gate)] = fill(Tensor({hidden, hidden}));
    params[decoder_bias_name(gate)] = Tensor::zeros({hidden});
  }
  params[kClassifierWeight] = fill(Tensor({kGrades, hidden}));
  params[kClassifierBias] = Tensor::zeros({kGrades});
}

DecoderOutput decode(Graph& g, Var context, Var h_init, std::size_t hidden) {
  const num::Shape want{hidden};
  if (context.shape() != want || h_init.shape() != want) {
    throw DimensionError("decode: context " + num::to_string(context.shape()) + " / state " +
                         num::to_string(h_init.shape()) + " do not match hidden " + std::to_string(hidden));
  }
  auto gate_pre = [&](char gate, Var state) {
    return num::add(num::add(num::matvec(g.parameter(decoder_weight_name(gate)), context),
                             num::matvec(g.parameter(decoder_recurrent_name(gate)), state)),
                    g.parameter(decoder_bias_name(gate)));
  };
  const Var r = num::sigmoid(gate_pre('r', h_init));
  const Var z = num::sigmoid(gate_pre('z', h_init));
  const Var c = num::tanh(num::add(
      num::add(num::matvec(g.parameter(decoder_weight_name('h')), context),
               num::matvec(g.parameter(decoder_recurrent_name('h')), num::mul(r, h_init))),
      g.parameter(decoder_bias_name('h'))));
  DecoderOutput out;
  out.state = num::add(num::mul(num::one_minus(z), h_init), num::mul(z, c));
  out.logits = num::add(num::matvec(g.parameter(kClassifierWeight), out.state), g.parameter(kClassifierBias));
  out.probs = num::softmax(out.logits);
  return out;
}

GradeDistribution distribution(const DecoderOutput& out) {
  const auto& p = out.probs.value();
  return {p[0], p[1], p[2]};
}

int predicted_grade(const GradeDistribution& p) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(kGrades); ++k)
    if (p[k] >= p[best]) best = k;
  return best;
}

int majority_vote(std::span<const int> grades) {
  if (grades.size() != 16) throw ContractError("majority_vote needs 16 patch grades, got " + std::to_string(grades.size()));
  std::array<int, kGrades> counts{};
  for (int g : grades) {
    if (g < 0 || g >= static_cast<int>(kGrades)) throw ContractError("majority_vote: grade out of range");
    ++counts[g];
  }
  int best = 0;
  for (int k = 1; k < static_cast<int>(kGrades); ++k)
    if (counts[k] >= counts[best]) best = k;
  return best;
}

}  // namespace msgru::attn
