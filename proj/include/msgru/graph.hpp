#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msgru/tensor.hpp"

namespace msgru::num {

/// Named learnable tensors. std::map keeps iteration (and therefore every
/// reduction over parameters) in a fixed order.
using ParamStore = std::map<std::string, Tensor>;
using GradMap = std::map<std::string, Tensor>;

class Graph;

/// Handle to one node of a Graph. Valid while the Graph is alive.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

  friend bool operator==(const Var& a, const Var& b) { return a.graph_ == b.graph_ && a.id_ == b.id_; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so node ids are
/// already a topological order and backward is a single reverse sweep.
class Graph {
 public:
  /// Receives the gradient of the node output and one accumulation buffer per
  /// input (nullptr when that input needs no gradient). Buffers must be added
  /// to, never overwritten: the same input can appear twice.
  using BackwardFn = std::function<void(const Tensor& out_grad, std::span<Tensor* const> in_grads)>;

  explicit Graph(const ParamStore* params = nullptr) : params_(params) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);

  /// Leaf bound to `name` in the parameter store. Repeated lookups return the
  /// same node, which is how weights are shared across calls and timesteps.
  Var parameter(const std::string& name);
  bool has_parameter(const std::string& name) const;
  const ParamStore& params() const;

  /// Appends an operation node. Forward value is computed by the caller.
  Var record(std::string_view op, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  std::string_view op(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient of a scalar loss with respect to every tensor of the bound
  /// parameter store; parameters the loss does not touch get zero tensors.
  GradMap backward(Var loss) const;

  /// Gradient of a scalar loss with respect to arbitrary nodes.
  std::vector<Tensor> gradients(Var loss, std::span<const Var> wrt) const;

 private:
  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    Tensor value;
    BackwardFn backward;
    bool requires_grad = false;
    std::string param_name;
  };

  std::vector<Tensor> sweep(Var loss) const;
  void check_owned(const Var& v) const;

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t, std::less<>> param_nodes_;
};

}  // namespace msgru::num
