#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "msgru/attnhead.hpp"
#include "msgru/error.hpp"
#include "msgru/ops.hpp"
#include "support.hpp"

using namespace msgru;
using namespace msgru::attn;
using num::Graph;
using num::Tensor;
using num::Var;

namespace {

num::ParamStore head_params(std::size_t hidden, Rng& rng) {
  num::ParamStore p;
  init_attention(p, hidden, rng);
  init_decoder(p, hidden, rng);
  return p;
}

std::vector<Var> constants(Graph& g, const std::vector<Tensor>& ts) {
  std::vector<Var> out;
  for (const auto& t : ts) out.push_back(g.constant(t));
  return out;
}

}  // namespace

TEST_CASE("attention basics") {
  Rng rng = make_rng(1);
  const auto p = head_params(4, rng);
  Graph g(&p);
  const Tensor h = testing::random_tensor({4}, rng);
  {
    const auto states = constants(g, {h});
    const auto c = attention_context(g, states, {true});
    CHECK(c.weights.value() == Tensor::vector({1.0}));
    CHECK(c.context.value() == h);
  }
  {
    const auto states = constants(g, {h, h, h, h});
    const auto c = attention_context(g, states, {true, true, true, true});
    for (double w : c.weights.value().values()) CHECK(w == doctest::Approx(0.25).epsilon(1e-15));
    for (std::size_t i = 0; i < 4; ++i) CHECK(c.context.value()[i] == doctest::Approx(h[i]).epsilon(1e-14));
  }
  const auto states = constants(g, {h, h});
  CHECK_THROWS_AS(attention_context(g, states, {false, false}), ContractError);
  CHECK_THROWS_AS(attention_context(g, states, {true}), ContractError);
}

TEST_CASE("attention permutation and masked slots") {
  Rng rng = make_rng(2);
  const auto p = head_params(5, rng);
  Graph g(&p);
  std::vector<Tensor> hs;
  for (int t = 0; t < 4; ++t) hs.push_back(testing::random_tensor({5}, rng));
  const auto base = attention_context(g, constants(g, hs), {true, true, true, true});

  auto swapped = hs;
  std::swap(swapped[1], swapped[3]);
  const auto perm = attention_context(g, constants(g, swapped), {true, true, true, true});
  CHECK(perm.weights.value()[1] == doctest::Approx(base.weights.value()[3]).epsilon(1e-15));
  CHECK(perm.weights.value()[3] == doctest::Approx(base.weights.value()[1]).epsilon(1e-15));
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(perm.context.value()[i] == doctest::Approx(base.context.value()[i]).epsilon(1e-14));

  // a masked slot in the middle changes nothing
  auto holed = hs;
  holed.insert(holed.begin() + 2, testing::random_tensor({5}, rng));
  const auto masked = attention_context(g, constants(g, holed), {true, true, false, true, true});
  CHECK(masked.weights.value() == base.weights.value());
  CHECK(masked.context.value() == base.context.value());
  const Tensor sw = masked.slot_weights();
  CHECK(sw[2] == 0.0);
  CHECK(sw[3] == base.weights.value()[2]);
}

TEST_CASE("mean and final-state contexts") {
  Rng rng = make_rng(3);
  Graph g;
  std::vector<Tensor> hs;
  for (int t = 0; t < 3; ++t) hs.push_back(testing::random_tensor({4}, rng));
  hs.push_back(testing::random_tensor({4}, rng));
  const std::vector<bool> mask{true, true, true, false};
  const auto states = constants(g, hs);
  const auto m = mean_context(g, states, mask);
  for (std::size_t i = 0; i < 4; ++i) CHECK(m.context.value()[i] == doctest::Approx((hs[0][i] + hs[1][i] + hs[2][i]) / 3.0));
  const auto f = final_state_context(g, states, mask);
  CHECK(f.context.value() == hs[2]);
  CHECK(f.slot_weights() == Tensor::vector({0, 0, 1, 0}));
}

TEST_CASE("decoder") {
  Rng rng = make_rng(4);
  auto p = head_params(4, rng);
  CHECK(p.at(kClassifierWeight).shape() == num::Shape{3, 4});
  {
    auto zero = p;
    zero[kClassifierWeight].fill(0.0);
    zero[kClassifierBias].fill(0.0);
    Graph g(&zero);
    const auto out = decode(g, g.constant(testing::random_tensor({4}, rng)), g.constant(testing::random_tensor({4}, rng)), 4);
    for (double v : distribution(out)) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  for (auto& [name, t] : p)
    for (auto& v : t.values()) v = uniform(rng, -1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g(&p);
    const auto d = distribution(decode(g, g.constant(testing::random_tensor({4}, rng)), g.constant(testing::random_tensor({4}, rng)), 4));
    CHECK(std::abs(d[0] + d[1] + d[2] - 1.0) < 1e-12);
  }
  Graph g(&p);
  CHECK_THROWS_AS(decode(g, g.constant(Tensor::zeros({3})), g.constant(Tensor::zeros({4})), 4), DimensionError);

  const Tensor ctx = testing::random_tensor({4}, rng), h0 = testing::random_tensor({4}, rng);
  const auto build = [&](Graph& gr) { return num::cross_entropy(decode(gr, gr.constant(ctx), gr.constant(h0), 4).logits, 1); };
  CHECK(testing::max_fd_error(build, p) < 1e-5);
}

TEST_CASE("attention gradient through decode") {
  Rng rng = make_rng(5);
  auto p = head_params(3, rng);
  std::vector<Tensor> hs;
  for (int t = 0; t < 3; ++t) hs.push_back(testing::random_tensor({3}, rng, -1, 1));
  const auto build = [&](Graph& g) {
    const auto states = constants(g, hs);
    const auto c = attention_context(g, states, {true, true, true});
    return num::cross_entropy(decode(g, c.context, states.back(), 3).logits, 2);
  };
  CHECK(testing::max_fd_error(build, p) < 1e-5);
}

TEST_CASE("predicted grade and majority vote") {
  CHECK(predicted_grade({0.2, 0.5, 0.3}) == 1);
  CHECK(predicted_grade({0.4, 0.4, 0.2}) == 1);
  CHECK(predicted_grade({0.5, 0.0, 0.5}) == 2);

  std::vector<int> all2(16, 2);
  CHECK(majority_vote(all2) == 2);
  std::vector<int> tie(16, 0);
  std::fill(tie.begin() + 8, tie.end(), 1);
  CHECK(majority_vote(tie) == 1);
  std::vector<int> strict{0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2};
  CHECK(majority_vote(strict) == 2);
  std::vector<int> low{0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2};
  CHECK(majority_vote(low) == 0);

  Rng rng = make_rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> v(16);
    for (auto& x : v) x = static_cast<int>(uniform_index(rng, 3));
    const int want = majority_vote(v);
    for (std::size_t i = 16; i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
    CHECK(majority_vote(v) == want);
  }
  CHECK_THROWS_AS(majority_vote(std::vector<int>(15, 0)), ContractError);
  CHECK_THROWS_AS(majority_vote(std::vector<int>(16, 3)), ContractError);
}
