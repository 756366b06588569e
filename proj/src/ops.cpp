#include "msgru/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msgru/error.hpp"

namespace msgru::num {

namespace {

constexpr double kOneBelow = 1.0 - 0x1.0p-53;

Graph& graph_of(const Var& v) {
  if (!v.valid()) throw ContractError("operation on an empty variable");
  return v.graph();
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         to_string(t.shape()));
  }
}

void require_scalar(const Tensor& t, const char* op) {
  if (t.numel() != 1) throw DimensionError(std::string(op) + ": expected a scalar, got " + to_string(t.shape()));
}

template <class F>
Var unary_map(Var x, const char* name, F&& f, Graph::BackwardFn (*make_back)(const Tensor& in, const Tensor& out)) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = f(in[i]);
  auto back = make_back(in, out);
  return graph_of(x).record(name, {x}, std::move(out), std::move(back));
}

}  // namespace

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents disagree, " + to_string(a.shape()) + " . " + to_string(b.shape()));
  }
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.at(i, p);
      const double* brow = b.data() + p * n;
      double* crow = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Var matmul(Var a, Var b) {
  Tensor out = matmul_values(a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  return graph_of(a).record("matmul", {a, b}, std::move(out),
                            [a, b, m, k, n](const Tensor& g, std::span<Tensor* const> gin) {
                              const Tensor& av = a.value();
                              const Tensor& bv = b.value();
                              if (gin[0]) {  // dA = dC . B^T
                                for (std::size_t i = 0; i < m; ++i)
                                  for (std::size_t p = 0; p < k; ++p) {
                                    double s = 0.0;
                                    for (std::size_t j = 0; j < n; ++j) s += g.at(i, j) * bv.at(p, j);
                                    gin[0]->at(i, p) += s;
                                  }
                              }
                              if (gin[1]) {  // dB = A^T . dC
                                for (std::size_t p = 0; p < k; ++p)
                                  for (std::size_t i = 0; i < m; ++i) {
                                    const double a_ip = av.at(i, p);
                                    for (std::size_t j = 0; j < n; ++j) gin[1]->at(p, j) += a_ip * g.at(i, j);
                                  }
                              }
                            });
}

Var matvec(Var w, Var x) {
  const Tensor& wv = w.value();
  const Tensor& xv = x.value();
  require_rank(wv, 2, "matvec");
  require_rank(xv, 1, "matvec");
  const std::size_t m = wv.dim(0), k = wv.dim(1);
  if (xv.dim(0) != k) {
    throw DimensionError("matvec: inner extents disagree, " + to_string(wv.shape()) + " . " + to_string(xv.shape()));
  }
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = wv.data() + i * k;
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += row[p] * xv[p];
    out[i] = s;
  }
  return graph_of(w).record("matvec", {w, x}, std::move(out),
                            [w, x, m, k](const Tensor& g, std::span<Tensor* const> gin) {
                              const Tensor& wv = w.value();
                              const Tensor& xv = x.value();
                              if (gin[0]) {
                                for (std::size_t i = 0; i < m; ++i) {
                                  double* row = gin[0]->data() + i * k;
                                  for (std::size_t p = 0; p < k; ++p) row[p] += g[i] * xv[p];
                                }
                              }
                              if (gin[1]) {
                                for (std::size_t i = 0; i < m; ++i) {
                                  const double* row = wv.data() + i * k;
                                  for (std::size_t p = 0; p < k; ++p) (*gin[1])[p] += g[i] * row[p];
                                }
                              }
                            });
}

Var add(Var a, Var b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return graph_of(a).record("add", {a, b}, std::move(out), [](const Tensor& g, std::span<Tensor* const> gin) {
    for (auto* gi : gin)
      if (gi)
        for (std::size_t i = 0; i < g.numel(); ++i) (*gi)[i] += g[i];
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return graph_of(a).record("sub", {a, b}, std::move(out), [](const Tensor& g, std::span<Tensor* const> gin) {
    if (gin[0])
      for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i];
    if (gin[1])
      for (std::size_t i = 0; i < g.numel(); ++i) (*gin[1])[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out = av;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  return graph_of(a).record("mul", {a, b}, std::move(out), [a, b](const Tensor& g, std::span<Tensor* const> gin) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (gin[0])
      for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i] * bv[i];
    if (gin[1])
      for (std::size_t i = 0; i < g.numel(); ++i) (*gin[1])[i] += g[i] * av[i];
  });
}

Var scale(Var s, Var x) {
  require_scalar(s.value(), "scale");
  const double sv = s.value()[0];
  const Tensor& xv = x.value();
  Tensor out = xv;
  for (auto& e : out.values()) e *= sv;
  return graph_of(s).record("scale", {s, x}, std::move(out), [sv, x](const Tensor& g, std::span<Tensor* const> gin) {
    const Tensor& xv = x.value();
    if (gin[0]) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.numel(); ++i) acc += g[i] * xv[i];
      (*gin[0])[0] += acc;
    }
    if (gin[1])
      for (std::size_t i = 0; i < g.numel(); ++i) (*gin[1])[i] += g[i] * sv;
  });
}

Var one_minus(Var x) {
  Tensor out = x.value();
  for (auto& e : out.values()) e = 1.0 - e;
  return graph_of(x).record("one_minus", {x}, std::move(out), [](const Tensor& g, std::span<Tensor* const> gin) {
    if (gin[0])
      for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] -= g[i];
  });
}

Var sigmoid(Var x) {
  return unary_map(
      x, "sigmoid",
      [](double v) {
        const double y = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        return std::clamp(y, std::numeric_limits<double>::min(), kOneBelow);
      },
      [](const Tensor&, const Tensor& out) -> Graph::BackwardFn {
        return [out](const Tensor& g, std::span<Tensor* const> gin) {
          if (gin[0])
            for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i] * out[i] * (1.0 - out[i]);
        };
      });
}

Var tanh(Var x) {
  return unary_map(
      x, "tanh", [](double v) { return std::clamp(std::tanh(v), -kOneBelow, kOneBelow); },
      [](const Tensor&, const Tensor& out) -> Graph::BackwardFn {
        return [out](const Tensor& g, std::span<Tensor* const> gin) {
          if (gin[0])
            for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i] * (1.0 - out[i] * out[i]);
        };
      });
}

Var relu(Var x) {
  return unary_map(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](const Tensor& in, const Tensor&) -> Graph::BackwardFn {
        return [in](const Tensor& g, std::span<Tensor* const> gin) {
          if (gin[0])
            for (std::size_t i = 0; i < g.numel(); ++i)
              if (in[i] > 0.0) (*gin[0])[i] += g[i];
        };
      });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return graph_of(x).record("sum", {x}, Tensor::scalar(s), [](const Tensor& g, std::span<Tensor* const> gin) {
    if (gin[0])
      for (auto& e : gin[0]->values()) e += g[0];
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().numel());
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return graph_of(x).record("mean", {x}, Tensor::scalar(s / n), [n](const Tensor& g, std::span<Tensor* const> gin) {
    if (gin[0])
      for (auto& e : gin[0]->values()) e += g[0] / n;
  });
}

Var dot(Var a, Var b) {
  require_same_shape(a.shape(), b.shape(), "dot");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  double s = 0.0;
  for (std::size_t i = 0; i < av.numel(); ++i) s += av[i] * bv[i];
  return graph_of(a).record("dot", {a, b}, Tensor::scalar(s), [a, b](const Tensor& g, std::span<Tensor* const> gin) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (gin[0])
      for (std::size_t i = 0; i < av.numel(); ++i) (*gin[0])[i] += g[0] * bv[i];
    if (gin[1])
      for (std::size_t i = 0; i < av.numel(); ++i) (*gin[1])[i] += g[0] * av[i];
  });
}

Tensor softmax_values(std::span<const double> logits) {
  if (logits.empty()) throw DimensionError("softmax: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  Tensor out({logits.size()});
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    z += out[i];
  }
  for (auto& e : out.values()) e /= z;
  return out;
}

Var softmax(Var logits) {
  require_rank(logits.value(), 1, "softmax");
  Tensor out = softmax_values(logits.value().values());
  const Tensor y = out;
  return graph_of(logits).record("softmax", {logits}, std::move(out),
                                 [y](const Tensor& g, std::span<Tensor* const> gin) {
                                   if (!gin[0]) return;
                                   double gy = 0.0;
                                   for (std::size_t i = 0; i < y.numel(); ++i) gy += g[i] * y[i];
                                   for (std::size_t i = 0; i < y.numel(); ++i) (*gin[0])[i] += y[i] * (g[i] - gy);
                                 });
}

Var cross_entropy(Var logits, std::size_t target) {
  const Tensor& lv = logits.value();
  require_rank(lv, 1, "cross_entropy");
  if (target >= lv.numel()) {
    throw ContractError("cross_entropy: target " + std::to_string(target) + " out of range for " +
                        std::to_string(lv.numel()) + " classes");
  }
  const Tensor p = softmax_values(lv.values());
  const double mx = *std::max_element(lv.values().begin(), lv.values().end());
  double z = 0.0;
  for (double v : lv.values()) z += std::exp(v - mx);
  const double loss = mx + std::log(z) - lv[target];
  return graph_of(logits).record("cross_entropy", {logits}, Tensor::scalar(loss),
                                 [p, target](const Tensor& g, std::span<Tensor* const> gin) {
                                   if (!gin[0]) return;
                                   for (std::size_t i = 0; i < p.numel(); ++i) {
                                     (*gin[0])[i] += g[0] * (p[i] - (i == target ? 1.0 : 0.0));
                                   }
                                 });
}

Var conv2d(Var input, Var kernels, Var bias) {
  const Tensor& x = input.value();
  const Tensor& k = kernels.value();
  const Tensor& b = bias.value();
  require_rank(x, 3, "conv2d input");
  require_rank(k, 4, "conv2d kernels");
  require_rank(b, 1, "conv2d bias");
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = k.dim(0);
  if (k.dim(1) != cin || k.dim(2) != 3 || k.dim(3) != 3) {
    throw DimensionError("conv2d: kernels " + to_string(k.shape()) + " do not fit input " + to_string(x.shape()));
  }
  if (b.dim(0) != cout) {
    throw DimensionError("conv2d: bias " + to_string(b.shape()) + " does not fit kernels " + to_string(k.shape()));
  }

  Tensor out({cout, h, w});
  const std::size_t plane = h * w;
  for (std::size_t o = 0; o < cout; ++o) {
    double* op = out.data() + o * plane;
    std::fill(op, op + plane, b[o]);
    for (std::size_t c = 0; c < cin; ++c) {
      const double* ip = x.data() + c * plane;
      const double* kp = k.data() + (o * cin + c) * 9;
      for (int dy = -1; dy <= 1; ++dy) {
        const std::size_t y0 = dy < 0 ? 1 : 0;
        const std::size_t y1 = dy > 0 ? h - 1 : h;
        for (int dx = -1; dx <= 1; ++dx) {
          const double kv = kp[(dy + 1) * 3 + (dx + 1)];
          const std::size_t x0 = dx < 0 ? 1 : 0;
          const std::size_t x1 = dx > 0 ? w - 1 : w;
          for (std::size_t y = y0; y < y1; ++y) {
            double* orow = op + y * w;
            const double* irow = ip + (y + dy) * w + dx;
            for (std::size_t xx = x0; xx < x1; ++xx) orow[xx] += kv * irow[xx];
          }
        }
      }
    }
  }

  return graph_of(input).record(
      "conv2d", {input, kernels, bias}, std::move(out),
      [input, kernels, cin, cout, h, w, plane](const Tensor& g, std::span<Tensor* const> gin) {
        const Tensor& x = input.value();
        const Tensor& k = kernels.value();
        for (std::size_t o = 0; o < cout; ++o) {
          const double* gp = g.data() + o * plane;
          if (gin[2]) {
            double s = 0.0;
            for (std::size_t i = 0; i < plane; ++i) s += gp[i];
            (*gin[2])[o] += s;
          }
          for (std::size_t c = 0; c < cin; ++c) {
            const double* ip = x.data() + c * plane;
            const double* kp = k.data() + (o * cin + c) * 9;
            double* gip = gin[0] ? gin[0]->data() + c * plane : nullptr;
            double* gkp = gin[1] ? gin[1]->data() + (o * cin + c) * 9 : nullptr;
            for (int dy = -1; dy <= 1; ++dy) {
              const std::size_t y0 = dy < 0 ? 1 : 0;
              const std::size_t y1 = dy > 0 ? h - 1 : h;
              for (int dx = -1; dx <= 1; ++dx) {
                const std::size_t x0 = dx < 0 ? 1 : 0;
                const std::size_t x1 = dx > 0 ? w - 1 : w;
                const double kv = kp[(dy + 1) * 3 + (dx + 1)];
                double acc = 0.0;
                for (std::size_t y = y0; y < y1; ++y) {
                  const double* grow = gp + y * w;
                  const double* irow = ip + (y + dy) * w + dx;
                  if (gkp)
                    for (std::size_t xx = x0; xx < x1; ++xx) acc += grow[xx] * irow[xx];
                  if (gip) {
                    double* girow = gip + (y + dy) * w + dx;
                    for (std::size_t xx = x0; xx < x1; ++xx) girow[xx] += kv * grow[xx];
                  }
                }
                if (gkp) gkp[(dy + 1) * 3 + (dx + 1)] += acc;
              }
            }
          }
        }
      });
}

Var maxpool2(Var input) {
  const Tensor& x = input.value();
  require_rank(x, 3, "maxpool2");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h < 2 || w < 2) throw DimensionError("maxpool2: spatial extents must be >= 2, got " + to_string(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out({c, oh, ow});
  std::vector<std::size_t> argmax(out.numel());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = ch * h * w + (2 * i) * w + 2 * j;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ch * h * w + (2 * i + dy) * w + 2 * j + dx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (ch * oh + i) * ow + j;
        out[o] = x[best];
        argmax[o] = best;
      }
    }
  }
  return graph_of(input).record("maxpool2", {input}, std::move(out),
                                [argmax = std::move(argmax)](const Tensor& g, std::span<Tensor* const> gin) {
                                  if (!gin[0]) return;
                                  for (std::size_t o = 0; o < argmax.size(); ++o) (*gin[0])[argmax[o]] += g[o];
                                });
}

Var global_average(Var input) {
  const Tensor& x = input.value();
  require_rank(x, 3, "global_average");
  const std::size_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
  Tensor out({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += x[ch * plane + i];
    out[ch] = s / static_cast<double>(plane);
  }
  return graph_of(input).record("global_average", {input}, std::move(out),
                                [c, plane](const Tensor& g, std::span<Tensor* const> gin) {
                                  if (!gin[0]) return;
                                  for (std::size_t ch = 0; ch < c; ++ch)
                                    for (std::size_t i = 0; i < plane; ++i)
                                      (*gin[0])[ch * plane + i] += g[ch] / static_cast<double>(plane);
                                });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return graph_of(x).record("reshape", {x}, std::move(out), [](const Tensor& g, std::span<Tensor* const> gin) {
    if (gin[0])
      for (std::size_t i = 0; i < g.numel(); ++i) (*gin[0])[i] += g[i];
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  std::vector<double> data;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require_rank(p.value(), 1, "concat");
    offsets.push_back(data.size());
    data.insert(data.end(), p.value().values().begin(), p.value().values().end());
  }
  const std::size_t n = data.size();
  Tensor out({n}, std::move(data));
  return graph_of(parts.front())
      .record("concat", std::vector<Var>(parts.begin(), parts.end()), std::move(out),
              [offsets](const Tensor& g, std::span<Tensor* const> gin) {
                for (std::size_t k = 0; k < gin.size(); ++k) {
                  if (!gin[k]) continue;
                  for (std::size_t i = 0; i < gin[k]->numel(); ++i) (*gin[k])[i] += g[offsets[k] + i];
                }
              });
}

Var pick(Var x, std::size_t index) {
  require_rank(x.value(), 1, "pick");
  if (index >= x.value().numel()) throw ContractError("pick: index out of range");
  return graph_of(x).record("pick", {x}, Tensor::scalar(x.value()[index]),
                            [index](const Tensor& g, std::span<Tensor* const> gin) {
                              if (gin[0]) (*gin[0])[index] += g[0];
                            });
}

}  // namespace msgru::num
