#include "msgru/graph.hpp"

#include "msgru/error.hpp"

namespace msgru::num {

const Tensor& Var::value() const { return graph_->value(id_); }

void Graph::check_owned(const Var& v) const {
  if (!v.valid() || v.graph_ != this || v.id_ >= nodes_.size()) {
    throw ContractError("variable does not belong to this graph");
  }
}

Var Graph::constant(Tensor value) {
  Node node;
  node.op = "constant";
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(const std::string& name) {
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return Var(this, it->second);
  const auto& store = params();
  auto it = store.find(name);
  if (it == store.end()) throw ContractError("unknown parameter '" + name + "'");
  Node node;
  node.op = "parameter";
  node.value = it->second;
  node.requires_grad = true;
  node.param_name = name;
  nodes_.push_back(std::move(node));
  param_nodes_.emplace(name, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

bool Graph::has_parameter(const std::string& name) const { return params_ && params_->contains(name); }

const ParamStore& Graph::params() const {
  if (!params_) throw ContractError("graph has no parameter store bound");
  return *params_;
}

Var Graph::record(std::string_view op, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  Node node;
  node.op = std::string(op);
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const auto& in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::vector<Tensor> Graph::sweep(Var loss) const {
  check_owned(loss);
  const Node& root = nodes_[loss.id()];
  if (root.value.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + to_string(root.value.shape()));
  }
  std::vector<Tensor> grads(loss.id() + 1);
  grads[loss.id()] = Tensor::filled(root.value.shape(), 1.0);

  std::vector<Tensor*> in_grads;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.requires_grad || !node.backward || grads[id].empty()) continue;
    in_grads.clear();
    for (auto in : node.inputs) {
      if (!nodes_[in].requires_grad) {
        in_grads.push_back(nullptr);
        continue;
      }
      if (grads[in].empty()) grads[in] = Tensor::zeros(nodes_[in].value.shape());
      in_grads.push_back(&grads[in]);
    }
    node.backward(grads[id], in_grads);
  }
  return grads;
}

GradMap Graph::backward(Var loss) const {
  auto grads = sweep(loss);
  GradMap out;
  for (const auto& [name, value] : params()) {
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end() && it->second < grads.size() && !grads[it->second].empty()) {
      out.emplace(name, std::move(grads[it->second]));
    } else {
      out.emplace(name, Tensor::zeros(value.shape()));
    }
  }
  return out;
}

std::vector<Tensor> Graph::gradients(Var loss, std::span<const Var> wrt) const {
  auto grads = sweep(loss);
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const auto& v : wrt) {
    check_owned(v);
    if (v.id() < grads.size() && !grads[v.id()].empty()) {
      out.push_back(grads[v.id()]);
    } else {
      out.push_back(Tensor::zeros(nodes_[v.id()].value.shape()));
    }
  }
  return out;
}

}  // namespace msgru::num
