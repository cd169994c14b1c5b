#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vmg/tensor.hpp"

namespace vmg {

enum class Precision { kFloat64, kFloat32 };

struct GraphOptions {
  /// kFloat32 rounds every node value to single precision.
  Precision precision = Precision::kFloat64;
#ifdef NDEBUG
  bool check_finite = false;
#else
  bool check_finite = true;
#endif
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

using NamedTensors = std::map<std::string, Tensor, std::less<>>;

struct BackwardArgs {
  std::span<const Tensor* const> inputs;
  const Tensor& output;
  const Tensor& grad_output;
  /// One slot per input; nullptr when that input needs no gradient.
  /// Contributions must be added, never assigned.
  std::span<Tensor* const> grad_inputs;
};

struct OpSpec {
  std::string name;
  std::function<Tensor(std::span<const Tensor* const>)> forward;
  std::function<void(const BackwardArgs&)> backward;
};

/// Define-by-run computation graph with reverse-mode differentiation.
///
/// Nodes are created in topological order and values are computed eagerly.
/// `evaluate` re-runs the recorded ops with new bindings for named leaves,
/// so a graph can also be built once and evaluated many times. A graph is
/// not thread-safe; distinct graphs are independent.
class Graph {
 public:
  explicit Graph(GraphOptions options = {});
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  const GraphOptions& options() const noexcept { return options_; }

  Var constant(Tensor value);
  Var scalar(double value) { return constant(Tensor::scalar(value)); }
  /// Named leaf that receives a gradient. Names must be unique.
  Var parameter(std::string name, Tensor value);
  /// Named leaf without a value until bound by `evaluate` or `bind`.
  Var input(std::string name, Shape shape);

  Var apply(OpSpec op, std::vector<Var> inputs);

  /// Replaces the value of a named leaf without recomputing dependents.
  void bind(std::string_view name, Tensor value);

  /// Binds the named leaves and recomputes every op up to `output`.
  Tensor evaluate(Var output, const NamedTensors& bindings = {});

  /// d(output)/d(wrt[i]) for a single-element output.
  std::vector<Tensor> gradient(Var output, std::span<const Var> wrt);
  /// Gradient with respect to every parameter, keyed by name.
  NamedTensors gradient(Var output);

  const Tensor& value(Var v) const { return nodes_.at(v.id_).value; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::vector<Var> parameters() const;
  const std::string& name(Var v) const { return nodes_.at(v.id_).name; }
  std::string_view op_name(Var v) const { return nodes_.at(v.id_).op.name; }
  Var find(std::string_view name) const;

 private:
  enum class Kind { kConstant, kParameter, kInput, kOp };

  struct Node {
    Kind kind;
    std::string name;
    OpSpec op;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool has_value = false;
    bool requires_grad = false;
  };

  Var add_leaf(Kind kind, std::string name, Tensor value, bool has_value);
  void run_forward(Node& node);
  void finish_value(Node& node, Tensor value);
  std::vector<Tensor> backward(Var output);

  GraphOptions options_;
  std::vector<Node> nodes_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
};

}  // namespace vmg
