#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "protopop/tensor.hpp"

namespace protopop {

// A trainable tensor with its gradient buffer. Parameters outlive graphs; a
// graph binds them as leaves and `Graph::backward` accumulates into `grad`.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  void zero_grad() { grad.fill(0.0); }

  std::string name;
  Tensor value;
  Tensor grad;
  bool requires_grad = true;
};

namespace ad {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  // Convenience for 1x1 nodes.
  double scalar() const;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, which is a
// topological order, so backward is a single reverse sweep that visits each
// reached node once.
class Graph {
 public:
  using Backprop = std::function<void(Graph&, const Tensor& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf bound to `param`; gradients flow back into param.grad when
  // param.requires_grad is set.
  Var parameter(Parameter& param);

  // Records an op output. Throws NumericError if `value` has NaN/Inf.
  Var record(const char* op, Tensor value, std::vector<Var> inputs, Backprop backprop);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape. Loss must be 1x1.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(Var v) const { return nodes_[v.id_].needs_grad; }
  // Adds `delta` into the gradient of `v` (no-op for constants).
  void accumulate(Var v, const Tensor& delta);
  // Gradient of a node after backward; zero tensor if unreached.
  Tensor gradient(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    std::vector<std::size_t> inputs;
    Backprop backprop;
    Parameter* param = nullptr;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// a (m x n) + row (1 x n) broadcast over rows.
Var add_row(Var a, Var row);
Var scale(Var a, double factor);
// a * s where s is a 1x1 node.
Var mul_scalar(Var a, Var s);
Var hadamard(Var a, Var b);
Var exp(Var a);
// Sum of all elements -> 1x1.
Var sum(Var a);
// Per-row sum -> m x 1.
Var row_sum(Var a);
// Per-column sum -> 1 x n.
Var col_sum(Var a);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
// Row-wise softmax of a / tau, max-subtracted.
Var softmax_rows(Var a, double tau = 1.0);
// out(i, j) = cos(a_i, b_j). Throws NumericError on a zero-norm row.
Var cosine_rows(Var a, Var b);
// -log softmax(logits)[label] for a 1 x K row.
Var cross_entropy(Var logits, std::size_t label);

}  // namespace ad
}  // namespace protopop
