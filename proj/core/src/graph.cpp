#include "vmg/graph.hpp"

#include <stdexcept>

namespace vmg {

const Tensor& Var::value() const {
  if (!graph_) throw std::logic_error("Var: use of an unbound variable");
  return graph_->value(*this);
}

Graph::Graph(GraphOptions options) : options_(options) {}

Var Graph::add_leaf(Kind kind, std::string name, Tensor value, bool has_value) {
  if (!name.empty()) {
    if (by_name_.contains(name)) throw std::invalid_argument("Graph: duplicate leaf name '" + name + "'");
    by_name_.emplace(name, nodes_.size());
  }
  Node node;
  node.kind = kind;
  node.name = std::move(name);
  node.op.name = kind == Kind::kConstant ? "constant" : kind == Kind::kParameter ? "parameter" : "input";
  node.requires_grad = kind == Kind::kParameter;
  nodes_.push_back(std::move(node));
  if (has_value) finish_value(nodes_.back(), std::move(value));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) { return add_leaf(Kind::kConstant, {}, std::move(value), true); }

Var Graph::parameter(std::string name, Tensor value) {
  if (name.empty()) throw std::invalid_argument("Graph: parameters need a name");
  return add_leaf(Kind::kParameter, std::move(name), std::move(value), true);
}

Var Graph::input(std::string name, Shape shape) {
  if (name.empty()) throw std::invalid_argument("Graph: inputs need a name");
  Var v = add_leaf(Kind::kInput, std::move(name), Tensor(), false);
  nodes_.back().value = Tensor(std::move(shape));
  return v;
}

void Graph::finish_value(Node& node, Tensor value) {
  if (options_.precision == Precision::kFloat32) {
    for (double& x : value.values()) x = static_cast<double>(static_cast<float>(x));
  }
  if (options_.check_finite && !value.all_finite()) {
    throw NumericalError("op '" + node.op.name + "' produced non-finite values (shape " +
                         shape_str(value.shape()) + ")");
  }
  node.value = std::move(value);
  node.has_value = true;
}

void Graph::run_forward(Node& node) {
  std::vector<const Tensor*> in;
  in.reserve(node.inputs.size());
  for (auto id : node.inputs) {
    if (!nodes_[id].has_value) return;
    in.push_back(&nodes_[id].value);
  }
  finish_value(node, node.op.forward(in));
}

Var Graph::apply(OpSpec op, std::vector<Var> inputs) {
  Node node;
  node.kind = Kind::kOp;
  node.op = std::move(op);
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.graph_ != this) throw std::invalid_argument("Graph: op '" + node.op.name + "' mixes graphs");
    node.inputs.push_back(v.id_);
    node.requires_grad = node.requires_grad || nodes_[v.id_].requires_grad;
  }
  // Evaluate before inserting so a failing op leaves the graph untouched.
  run_forward(node);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Graph::bind(std::string_view name, Tensor value) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::invalid_argument("Graph: no leaf named '" + std::string(name) + "'");
  Node& node = nodes_[it->second];
  if (node.kind == Kind::kInput && !node.value.shape().empty() && node.value.shape() != value.shape()) {
    throw ShapeError("Graph: input '" + node.name + "' expects shape " + shape_str(node.value.shape()) +
                     ", got " + shape_str(value.shape()));
  }
  finish_value(node, std::move(value));
}

Tensor Graph::evaluate(Var output, const NamedTensors& bindings) {
  for (const auto& [name, value] : bindings) bind(name, value);
  for (std::size_t i = 0; i <= output.id_; ++i) {
    Node& node = nodes_[i];
    if (node.kind == Kind::kOp) {
      node.has_value = false;
      run_forward(node);
    } else if (!node.has_value) {
      throw std::invalid_argument("Graph: leaf '" + node.name + "' is not bound");
    }
  }
  if (!nodes_[output.id_].has_value) throw std::logic_error("Graph: output could not be computed");
  return nodes_[output.id_].value;
}

std::vector<Tensor> Graph::backward(Var output) {
  const Node& out = nodes_.at(output.id_);
  if (out.value.size() != 1) {
    throw std::invalid_argument("gradient: output of op '" + out.op.name + "' has shape " +
                                shape_str(out.value.shape()) + ", expected a scalar");
  }
  std::vector<Tensor> grads(output.id_ + 1);
  grads[output.id_] = Tensor(out.value.shape(), 1.0);
  if (!out.requires_grad) return grads;

  std::vector<const Tensor*> in;
  std::vector<Tensor*> gin;
  for (std::size_t i = output.id_ + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (node.kind != Kind::kOp || !node.requires_grad || grads[i].empty()) continue;
    in.clear();
    gin.clear();
    for (auto id : node.inputs) {
      in.push_back(&nodes_[id].value);
      if (nodes_[id].requires_grad) {
        if (grads[id].empty()) grads[id] = Tensor(nodes_[id].value.shape());
        gin.push_back(&grads[id]);
      } else {
        gin.push_back(nullptr);
      }
    }
    node.op.backward(BackwardArgs{in, node.value, grads[i], gin});
    // Intermediate gradients are no longer needed once propagated.
    if (i != output.id_) grads[i] = Tensor();
  }
  return grads;
}

std::vector<Tensor> Graph::gradient(Var output, std::span<const Var> wrt) {
  auto grads = backward(output);
  std::vector<Tensor> result;
  result.reserve(wrt.size());
  for (const Var& v : wrt) {
    if (v.id_ < grads.size() && !grads[v.id_].empty()) {
      result.push_back(grads[v.id_]);
    } else {
      result.emplace_back(nodes_.at(v.id_).value.shape());
    }
  }
  return result;
}

NamedTensors Graph::gradient(Var output) {
  auto grads = backward(output);
  NamedTensors result;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind != Kind::kParameter) continue;
    if (i < grads.size() && !grads[i].empty()) {
      result.emplace(nodes_[i].name, std::move(grads[i]));
    } else {
      result.emplace(nodes_[i].name, Tensor(nodes_[i].value.shape()));
    }
  }
  return result;
}

std::vector<Var> Graph::parameters() const {
  std::vector<Var> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].kind == Kind::kParameter) out.push_back(Var(const_cast<Graph*>(this), i));
  return out;
}

Var Graph::find(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::invalid_argument("Graph: no leaf named '" + std::string(name) + "'");
  return Var(const_cast<Graph*>(this), it->second);
}

}  // namespace vmg
