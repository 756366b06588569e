#include <doctest.h>

#include <cmath>
#include <numeric>

#include "msgru/adam.hpp"
#include "msgru/error.hpp"
#include "msgru/gradcheck.hpp"
#include "msgru/ops.hpp"
#include "msgru/tensor_io.hpp"
#include "support.hpp"

using namespace msgru;
using namespace msgru::num;
using testing::max_fd_error;
using testing::random_tensor;

TEST_CASE("tensor construction checks extents") {
  CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  const Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  CHECK(m.shape() == Shape{2, 3});
  CHECK(m.at(1, 2) == 6.0);
  CHECK(m.reshaped({3, 2}).at(2, 0) == 5.0);
  CHECK_THROWS_AS(m.reshaped({4}), DimensionError);
}

TEST_CASE("matmul examples and gradient") {
  Graph g;
  auto id = g.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  auto col = g.constant(Tensor::matrix({{3}, {4}}));
  CHECK(matmul(id, col).value() == Tensor::matrix({{3}, {4}}));
  auto row = g.constant(Tensor::matrix({{1, 2}}));
  CHECK(matmul(row, col).value().item() == 11.0);
  CHECK_THROWS_AS(matmul(row, row), DimensionError);

  Rng rng = make_rng(11);
  ParamStore p{{"a", random_tensor({4, 3}, rng)}, {"b", random_tensor({3, 2}, rng)},
               {"w", random_tensor({4, 2}, rng)}};
  auto build = [](Graph& gr) {
    return sum(mul(matmul(gr.parameter("a"), gr.parameter("b")), gr.parameter("w")));
  };
  CHECK(max_fd_error(build, p) < 1e-6);
}

TEST_CASE("matmul error names both shapes") {
  Graph g;
  auto a = g.constant(Tensor::zeros({2, 3}));
  auto b = g.constant(Tensor::zeros({2, 3}));
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3] . [2x3]") != std::string::npos);
  }
}

TEST_CASE("elementwise ops") {
  Graph g;
  CHECK(sigmoid(g.constant(Tensor::scalar(0.0))).value().item() == 0.5);
  CHECK(tanh(g.constant(Tensor::scalar(0.0))).value().item() == 0.0);
  auto big = g.constant(Tensor::vector({-800.0, -40.0, 40.0, 800.0}));
  for (double v : sigmoid(big).value().values()) CHECK((v > 0.0 && v < 1.0));
  for (double v : tanh(big).value().values()) CHECK((v > -1.0 && v < 1.0));
  CHECK(relu(big).value() == Tensor::vector({0.0, 0.0, 40.0, 800.0}));
  CHECK_THROWS_AS(add(g.constant(Tensor::zeros({2})), g.constant(Tensor::zeros({3}))), DimensionError);

  ParamStore p{{"x", Tensor::scalar(2.0)}};
  CHECK(max_fd_error([](Graph& gr) { return sigmoid(gr.parameter("x")); }, p) < 1e-8);
}

TEST_CASE("every differentiable op matches finite differences") {
  Rng rng = make_rng(5);
  ParamStore p{{"a", random_tensor({5}, rng)}, {"b", random_tensor({5}, rng)}, {"s", random_tensor({1}, rng)}};
  // keep relu away from its kink
  for (auto& v : p["a"].values())
    if (std::abs(v) < 0.1) v = 0.5;
  const std::vector<std::pair<const char*, std::function<Var(Graph&)>>> cases = {
      {"add", [](Graph& g) { return dot(add(g.parameter("a"), g.parameter("b")), g.parameter("b")); }},
      {"sub", [](Graph& g) { return dot(sub(g.parameter("a"), g.parameter("b")), g.parameter("a")); }},
      {"mul", [](Graph& g) { return sum(mul(g.parameter("a"), g.parameter("b"))); }},
      {"scale", [](Graph& g) { return dot(scale(g.parameter("s"), g.parameter("a")), g.parameter("b")); }},
      {"one_minus", [](Graph& g) { return dot(one_minus(g.parameter("a")), g.parameter("b")); }},
      {"sigmoid", [](Graph& g) { return dot(sigmoid(g.parameter("a")), g.parameter("b")); }},
      {"tanh", [](Graph& g) { return dot(tanh(g.parameter("a")), g.parameter("b")); }},
      {"relu", [](Graph& g) { return dot(relu(g.parameter("a")), g.parameter("b")); }},
      {"mean", [](Graph& g) { return mul(mean(g.parameter("a")), g.parameter("s")); }},
      {"softmax", [](Graph& g) { return dot(softmax(g.parameter("a")), g.parameter("b")); }},
      {"cross_entropy", [](Graph& g) { return cross_entropy(g.parameter("a"), 3); }},
      {"pick", [](Graph& g) { return mul(pick(g.parameter("a"), 2), pick(g.parameter("b"), 4)); }},
      {"concat",
       [](Graph& g) {
         std::vector<Var> parts{g.parameter("a"), g.parameter("s")};
         return sum(mul(concat(parts), concat(parts)));
       }},
      {"reshape",
       [](Graph& g) {
         return sum(matmul(reshape(g.parameter("a"), {5, 1}), reshape(g.parameter("b"), {1, 5})));
       }},
  };
  for (const auto& [name, build] : cases) {
    CAPTURE(name);
    CHECK(max_fd_error(build, p) < 1e-5);
  }
}

TEST_CASE("softmax") {
  Graph g;
  const auto u = softmax(g.constant(Tensor::vector({0, 0, 0}))).value();
  for (double v : u.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(softmax(g.constant(Tensor::vector({123.4}))).value().item() == 1.0);
  const auto big = softmax(g.constant(Tensor::vector({1000, 0}))).value();
  CHECK(big.all_finite());
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] < 1e-300);
  CHECK_THROWS_AS(softmax_values({}), DimensionError);

  Rng rng = make_rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor x = random_tensor({7}, rng, -20, 20);
    const Tensor s = softmax_values(x.values());
    CHECK(std::abs(std::accumulate(s.values().begin(), s.values().end(), 0.0) - 1.0) < 1e-12);
    std::vector<double> rev(x.values().rbegin(), x.values().rend());
    const Tensor sr = softmax_values(rev);
    for (std::size_t i = 0; i < 7; ++i) CHECK(sr[6 - i] == doctest::Approx(s[i]).epsilon(1e-14));
  }
}

TEST_CASE("cross entropy of uniform logits is ln 3") {
  Graph g;
  CHECK(cross_entropy(g.constant(Tensor::vector({0.5, 0.5, 0.5})), 1).value().item() ==
        doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK_THROWS_AS(cross_entropy(g.constant(Tensor::vector({0, 0, 0})), 3), ContractError);
}

TEST_CASE("conv2d") {
  Graph g;
  Rng rng = make_rng(8);
  const Tensor x = random_tensor({1, 5, 4}, rng);
  Tensor zero_k({2, 1, 3, 3});
  auto out = conv2d(g.constant(x), g.constant(zero_k), g.constant(Tensor::vector({1.5, -2.0}))).value();
  CHECK(out.shape() == Shape{2, 5, 4});
  for (std::size_t i = 0; i < 20; ++i) CHECK(out[i] == 1.5);
  for (std::size_t i = 20; i < 40; ++i) CHECK(out[i] == -2.0);

  Tensor ident({1, 1, 3, 3});
  ident[4] = 1.0;
  CHECK(conv2d(g.constant(x), g.constant(ident), g.constant(Tensor::zeros({1}))).value().values()[7] == x[7]);
  CHECK(conv2d(g.constant(x), g.constant(ident), g.constant(Tensor::zeros({1}))).value().reshaped({5, 4}) ==
        x.reshaped({5, 4}));

  CHECK_THROWS_AS(conv2d(g.constant(x), g.constant(Tensor::zeros({1, 2, 3, 3})), g.constant(Tensor::zeros({1}))),
                  DimensionError);

  ParamStore p{{"x", random_tensor({2, 8, 8}, rng)},
               {"k", random_tensor({3, 2, 3, 3}, rng)},
               {"b", random_tensor({3}, rng)},
               {"w", random_tensor({3, 8, 8}, rng)}};
  auto build = [](Graph& gr) {
    return sum(mul(conv2d(gr.parameter("x"), gr.parameter("k"), gr.parameter("b")), gr.parameter("w")));
  };
  CHECK(max_fd_error(build, p) < 1e-5);
}

TEST_CASE("conv2d against a direct zero-padded sum") {
  Rng rng = make_rng(21);
  const Tensor x = random_tensor({2, 4, 3}, rng);
  const Tensor k = random_tensor({2, 2, 3, 3}, rng);
  const Tensor b = random_tensor({2}, rng);
  Graph g;
  const Tensor out = conv2d(g.constant(x), g.constant(k), g.constant(b)).value();
  for (std::size_t o = 0; o < 2; ++o)
    for (int y = 0; y < 4; ++y)
      for (int xx = 0; xx < 3; ++xx) {
        double s = b[o];
        for (std::size_t c = 0; c < 2; ++c)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = y + dy, xs = xx + dx;
              if (yy < 0 || yy >= 4 || xs < 0 || xs >= 3) continue;
              s += k[((o * 2 + c) * 3 + (dy + 1)) * 3 + (dx + 1)] * x[(c * 4 + yy) * 3 + xs];
            }
        CHECK(out[(o * 4 + y) * 3 + xx] == doctest::Approx(s).epsilon(1e-13));
      }
}

TEST_CASE("maxpool2") {
  Graph g;
  CHECK(maxpool2(g.constant(Tensor({1, 2, 2}, {1, 2, 3, 4}))).value() == Tensor({1, 1, 1}, {4}));
  CHECK(maxpool2(g.constant(Tensor::filled({2, 4, 6}, 0.7))).value() == Tensor::filled({2, 2, 3}, 0.7));
  CHECK(maxpool2(g.constant(Tensor::zeros({1, 5, 5}))).value().shape() == Shape{1, 2, 2});
  CHECK_THROWS_AS(maxpool2(g.constant(Tensor::zeros({1, 1, 4}))), DimensionError);

  // brute-force window enumeration: the gradient of the sum is one-hot per window
  Rng rng = make_rng(4);
  ParamStore p{{"x", random_tensor({2, 6, 4}, rng)}};
  Graph gp(&p);
  const auto grads = gp.backward(sum(maxpool2(gp.parameter("x"))));
  const Tensor& x = p["x"];
  const Tensor& dx = grads.at("x");
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t wy = 0; wy < 3; ++wy)
      for (std::size_t wx = 0; wx < 2; ++wx) {
        std::size_t best = 0;
        double best_v = -1e300;
        double ones = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
          const std::size_t i = (c * 6 + 2 * wy + k / 2) * 4 + 2 * wx + k % 2;
          if (x[i] > best_v) best_v = x[i], best = i;
          ones += dx[i];
        }
        CHECK(ones == 1.0);
        CHECK(dx[best] == 1.0);
      }

  // ties route to the first row-major element
  ParamStore t{{"x", Tensor::filled({1, 2, 2}, 1.0)}};
  Graph gt(&t);
  CHECK(gt.backward(sum(maxpool2(gt.parameter("x")))).at("x") == Tensor({1, 2, 2}, {1, 0, 0, 0}));
}

TEST_CASE("global average and its gradient") {
  Rng rng = make_rng(9);
  ParamStore p{{"x", random_tensor({3, 2, 2}, rng)}, {"w", random_tensor({3}, rng)}};
  Graph g(&p);
  const auto ga = global_average(g.parameter("x")).value();
  CHECK(ga[1] == doctest::Approx((p["x"][4] + p["x"][5] + p["x"][6] + p["x"][7]) / 4.0));
  CHECK(max_fd_error([](Graph& gr) { return dot(global_average(gr.parameter("x")), gr.parameter("w")); }, p) < 1e-6);
}

TEST_CASE("backward") {
  Rng rng = make_rng(1);
  ParamStore p{{"p", random_tensor({2, 3}, rng)}, {"unused", random_tensor({4}, rng)}};
  {
    Graph g(&p);
    const auto grads = g.backward(sum(g.parameter("p")));
    CHECK(grads.at("p") == Tensor::filled({2, 3}, 1.0));
    CHECK(grads.at("unused") == Tensor::zeros({4}));
  }
  {
    Graph g(&p);
    const auto x = g.parameter("p");
    const auto grads = g.backward(sum(mul(x, x)));
    for (std::size_t i = 0; i < 6; ++i) CHECK(grads.at("p")[i] == 2.0 * p["p"][i]);
  }
  {
    Graph g(&p);
    CHECK_THROWS_AS(g.backward(g.parameter("p")), ContractError);
  }
  Graph other;
  Graph g(&p);
  CHECK_THROWS_AS(add(g.parameter("unused"), other.constant(Tensor::zeros({4}))), ContractError);
}

TEST_CASE("graph replay is bit-identical") {
  Rng a = make_rng(77), b = make_rng(77);
  ParamStore pa{{"x", random_tensor({6}, a)}}, pb{{"x", random_tensor({6}, b)}};
  auto run = [](ParamStore& p) {
    Graph g(&p);
    const auto loss = sum(tanh(mul(g.parameter("x"), sigmoid(g.parameter("x")))));
    return std::pair{loss.value(), g.backward(loss)};
  };
  CHECK(run(pa) == run(pb));
}

TEST_CASE("adam") {
  ParamStore p{{"x", Tensor::vector({1.0, -2.0})}};
  AdamState s;
  adam_step(p, {{"x", Tensor::zeros({2})}}, s, 0.1);
  CHECK(p["x"] == Tensor::vector({1.0, -2.0}));
  CHECK(s.step == 1);

  ParamStore q{{"x", Tensor::vector({1.0, -2.0, 3.0})}};
  AdamState s1;
  adam_step(q, {{"x", Tensor::vector({0.5, -4.0, 1e-3})}}, s1, 0.01);
  CHECK(q["x"][0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(q["x"][1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  CHECK(q["x"][2] == doctest::Approx(3.0 - 0.01).epsilon(1e-4));
  CHECK(s1.m.at("x").shape() == Shape{3});

  ParamStore f{{"x", Tensor::scalar(1.0)}};
  AdamState sf;
  for (int i = 0; i < 100; ++i) {
    Graph g(&f);
    const auto x = g.parameter("x");
    const auto grads = g.backward(mul(x, x));
    adam_step(f, grads, sf, 0.1);
  }
  CHECK(sf.step == 100);
  CHECK(std::abs(f["x"].item()) < 0.1);

  CHECK_THROWS_AS(adam_step(f, {{"x", Tensor::zeros({2})}}, sf, 0.1), DimensionError);
  CHECK_THROWS_AS(adam_step(f, {{"x", Tensor::zeros({1})}}, sf, 0.0), ContractError);
}

TEST_CASE("grad_check") {
  Rng rng = make_rng(2);
  ParamStore p{{"w", random_tensor({3, 4}, rng, -0.5, 0.5)}, {"x", random_tensor({4}, rng, -0.5, 0.5)}};
  const auto linear = [c = random_tensor({3}, rng)](Graph& g) {
    return dot(g.constant(c), matvec(g.parameter("w"), g.constant(Tensor::filled({4}, 0.5))));
  };
  const auto before = p;
  GradCheckOptions wide;
  wide.epsilon = 1e-3;  // exact for linear f, so the widest step has the least roundoff
  const auto r = grad_check(linear, p, wide);
  CHECK(r.max_rel_error < 1e-10);
  CHECK(r.coords_checked == 16);
  CHECK(p == before);

  const auto nonlinear = [](Graph& g) { return sum(tanh(matvec(g.parameter("w"), g.parameter("x")))); };
  CHECK(grad_check(nonlinear, p).max_rel_error < 1e-6);

  GradCheckOptions sampled;
  sampled.max_coords_per_param = 2;
  CHECK(grad_check(nonlinear, p, sampled).coords_checked == 4);

  GradCheckOptions prefixed;
  prefixed.prefixes = {"x"};
  CHECK(grad_check(nonlinear, p, prefixed).coords_checked == 4);

  GradCheckOptions corrupt;
  corrupt.corrupt_analytic = 0.01;
  CHECK(grad_check(nonlinear, p, corrupt).max_rel_error > 1e-3);

  GradCheckOptions bad;
  bad.epsilon = 1e-2;
  CHECK_THROWS_AS(grad_check(nonlinear, p, bad), ContractError);

  int calls = 0;
  const auto flaky = [&calls](Graph& g) {
    ++calls;
    return scale(g.constant(Tensor::scalar(static_cast<double>(calls))), sum(g.parameter("x")));
  };
  CHECK_THROWS_AS(grad_check(flaky, p), ContractError);
}

TEST_CASE("tensor file format byte layout") {
  const Tensor t({1, 2}, {1.0, -2.5});
  const std::string bytes = encode_tensor(t);
  REQUIRE(bytes.size() == 4 + 4 + 4 + 2 * 8 + 2 * 8);
  CHECK(bytes.substr(0, 4) == "MSGT");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 2);
  CHECK(bytes[12] == 1);
  CHECK(bytes[20] == 2);
  // 1.0 = 0x3FF0000000000000 little-endian
  CHECK(static_cast<unsigned char>(bytes[35]) == 0x3F);
  CHECK(static_cast<unsigned char>(bytes[34]) == 0xF0);
  CHECK(decode_tensor(bytes) == t);

  CHECK_THROWS_AS(decode_tensor("MSGX" + bytes.substr(4)), FormatError);
  CHECK_THROWS_AS(decode_tensor(bytes.substr(0, bytes.size() - 1)), FormatError);
  std::string v2 = bytes;
  v2[4] = 2;
  CHECK_THROWS_AS(decode_tensor(v2), FormatError);
  CHECK_THROWS_AS(read_tensor("/nonexistent/dir/x.msgt"), DataError);
}
