#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "p2b/diffcore/array.hpp"

namespace p2b::diffcore {

class Graph;

// Lightweight handle to a node in a Graph.
struct Var {
  Graph* g = nullptr;
  int id = -1;
  bool valid() const { return g != nullptr && id >= 0; }
};

// Per-feature running statistics for batch normalization (inference mode).
// Owned by the parameter store; the graph reads and, in training mode,
// updates them as a side effect of the forward pass.
struct BnStats {
  std::vector<double> mean;
  std::vector<double> var;
  double momentum = 0.9;
  bool warmed = false;  // false until the first training batch
};

// Reverse-mode tape over dense arrays. Nodes are recorded in creation
// order, which is a valid topological order; backward() walks it in
// reverse. A graph is built for one forward pass and consumed by one
// backward() call.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Array a);                 // leaf; honors a.requires_grad
  Var constant(Array a);              // leaf without gradient

  const Array& value(Var v) const;
  const std::vector<double>& grad(Var v) const;

  // Populates gradients of every requires_grad leaf reachable from loss.
  // loss must be scalar; the graph is consumed afterwards.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // --- ops -------------------------------------------------------------
  Var linear(Var x, Var w, Var b);
  Var relu(Var x);
  Var sigmoid(Var x);
  Var batchnorm(Var x, Var gamma, Var beta, double eps, bool training, BnStats* stats);
  Var maxpool_groups(Var x, int group_size);   // [G*g x d] -> [G x d]
  Var maxpool_set(Var x);                      // [M x d]   -> [1 x d]
  Var gather_rows(Var x, std::vector<int> indices);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var x, int begin, int end);
  Var reshape(Var x, Shape shape);
  Var add(Var x, Var y);
  Var sub(Var x, Var y);
  Var mul(Var x, Var y);
  Var scale(Var x, double c);
  Var l2_normalize_rows(Var x);
  Var matmul_nt(Var a, Var b);                 // [J x d] x [I x d] -> [J x I]
  Var sum(Var x);                              // scalar

  // Weighted sum of scalar nodes -> scalar.
  Var wsum(const std::vector<Var>& scalars, const std::vector<double>& weights);

  // --- losses (targets and masks are plain data, not graph nodes) ------
  // (1/M_ts) * sum_j mask_j * sum_c |pred - target|; 0 when mask empty.
  Var masked_l1_mean(Var pred, const Array& target, const std::vector<double>& mask);
  // Same contract with squared residuals (L2 variant behind a config flag).
  Var masked_l2_mean(Var pred, const Array& target, const std::vector<double>& mask);
  // Mean binary cross entropy over entries with select != 0; logits clipped
  // to +-20. Returns 0 when nothing is selected.
  Var bce_logits_mean(Var logits, const std::vector<double>& labels,
                      const std::vector<double>& select);
  // Smooth-L1 (delta = 1) per column, averaged over rows with mask != 0 and
  // over columns. Residuals in wrap_col are wrapped to (-pi, pi].
  Var huber_masked_mean(Var pred, const Array& target, const std::vector<double>& mask,
                        int wrap_col);

 private:
  struct Node {
    Array value;
    std::vector<double> grad;
    bool needs_grad = false;
    std::vector<int> parents;
    std::function<void(Graph&)> backprop;  // empty for leaves
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var record(Array value, std::vector<int> parents, std::function<void(Graph&)> backprop);
  std::vector<double>& grad_buf(int id);

  std::vector<std::unique_ptr<Node>> nodes_;
  bool consumed_ = false;
};

}  // namespace p2b::diffcore
