#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "msgru/graph.hpp"

// Differentiable primitives. Every function records one node on the graph of
// its first operand. No implicit broadcasting: shapes must match exactly,
// except where a bias vector is part of the operation itself (conv2d).
namespace msgru::num {

/// [m x k] . [k x n] -> [m x n]
Var matmul(Var a, Var b);
/// [m x k] . [k] -> [m]
Var matvec(Var w, Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// s * x, with s a single-element tensor.
Var scale(Var s, Var x);
/// 1 - x
Var one_minus(Var x);

// Saturated outputs are clamped one ulp inside the open range so that the
// strict (0,1) and (-1,1) bounds hold for every finite input.
Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);

/// Sum of all elements -> [1]
Var sum(Var x);
/// Mean of all elements -> [1]
Var mean(Var x);
/// Inner product of equal-shaped tensors -> [1]
Var dot(Var a, Var b);

/// Max-subtracted softmax over a rank-1 tensor.
Var softmax(Var logits);
/// -log softmax(logits)[target] -> [1], computed through log-sum-exp.
Var cross_entropy(Var logits, std::size_t target);

/// 3x3 convolution, zero padding 1, stride 1. Any spatial extent >= 1 is accepted
/// (the last CNN stage convolves a 2x2 map).
/// input [c_in x h x w], kernels [c_out x c_in x 3 x 3], bias [c_out].
Var conv2d(Var input, Var kernels, Var bias);
/// 2x2 max pooling, stride 2. Ties go to the first maximal element in
/// row-major window order; odd trailing rows/columns are dropped.
Var maxpool2(Var input);
/// [c x h x w] -> [c], mean over the spatial extents.
Var global_average(Var input);

Var reshape(Var x, Shape shape);
/// Concatenates rank-1 tensors.
Var concat(std::span<const Var> parts);
/// Element i of a rank-1 tensor -> [1]
Var pick(Var x, std::size_t index);

// Value-only helpers on plain tensors.
Tensor softmax_values(std::span<const double> logits);
Tensor matmul_values(const Tensor& a, const Tensor& b);

}  // namespace msgru::num
