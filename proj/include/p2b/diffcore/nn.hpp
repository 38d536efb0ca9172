#pragma once

#include <map>
#include <string>
#include <vector>

#include "p2b/common.hpp"
#include "p2b/diffcore/graph.hpp"

namespace p2b::diffcore {

struct MlpLayer {
  int width = 0;
  bool batchnorm = false;
  bool relu = false;
};

// Fully-connected stack. Hidden layers follow the FC + batch norm + ReLU
// convention; heads end in a plain linear layer.
struct MlpSpec {
  std::vector<MlpLayer> layers;

  // Every layer gets batch norm + ReLU (pre-pool, per-point stacks).
  static MlpSpec hidden_stack(const std::vector<int>& widths);
  // Hidden layers get batch norm + ReLU, the final layer stays linear.
  static MlpSpec head(const std::vector<int>& hidden, int out_width);

  int out_dim(int in_dim) const;
};

struct AdamState {
  Array m;
  Array v;
  std::uint64_t step = 0;
};

// Named parameters plus per-parameter optimizer state and batch-norm
// running statistics. Values are plain arrays; a forward pass copies them
// into graph leaves, so a store snapshot is safe to share read-only.
struct ParamStore {
  std::map<std::string, Array> params;
  std::map<std::string, AdamState> adam;
  std::map<std::string, BnStats> bn;

  bool has(const std::string& name) const { return params.count(name) != 0; }
  Array& require(const std::string& name);
  const Array& require(const std::string& name) const;
  void add(const std::string& name, Array a);
};

using GradMap = std::map<std::string, std::vector<double>>;

// One Adam update with bias correction. Every parameter in the store must
// have a gradient in grads.
void adam_step(ParamStore& store, const GradMap& grads, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// Binds store parameters into a graph as leaves, once per name, and collects
// their gradients after backward().
class Binding {
 public:
  Binding(Graph& g, ParamStore& store, bool training)
      : graph_(&g), store_(&store), training_(training) {}

  Var param(const std::string& name);
  BnStats* bn_stats(const std::string& name);
  bool training() const { return training_; }
  Graph& graph() { return *graph_; }
  ParamStore& store() { return *store_; }

  // Gradients for every bound parameter (zeros when unreached by the loss).
  GradMap collect_grads() const;

 private:
  Graph* graph_;
  ParamStore* store_;
  bool training_;
  std::map<std::string, Var> bound_;
};

class Mlp {
 public:
  Mlp(std::string prefix, int in_dim, MlpSpec spec)
      : prefix_(std::move(prefix)), in_dim_(in_dim), spec_(std::move(spec)) {}

  // Creates parameters in the store (glorot-uniform weights, zero biases,
  // unit gamma). No-op for parameters that already exist.
  void init(ParamStore& store, Rng& rng) const;

  Var forward(Binding& ctx, Var x) const;

  int in_dim() const { return in_dim_; }
  int out_dim() const { return spec_.out_dim(in_dim_); }
  const std::string& prefix() const { return prefix_; }

 private:
  std::string prefix_;
  int in_dim_;
  MlpSpec spec_;
};

}  // namespace p2b::diffcore
