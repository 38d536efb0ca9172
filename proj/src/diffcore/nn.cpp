#include "p2b/diffcore/nn.hpp"

#include <cmath>

namespace p2b::diffcore {

MlpSpec MlpSpec::hidden_stack(const std::vector<int>& widths) {
  MlpSpec s;
  for (int w : widths) s.layers.push_back({w, true, true});
  return s;
}

MlpSpec MlpSpec::head(const std::vector<int>& hidden, int out_width) {
  MlpSpec s;
  for (int w : hidden) s.layers.push_back({w, true, true});
  s.layers.push_back({out_width, false, false});
  return s;
}

int MlpSpec::out_dim(int in_dim) const {
  return layers.empty() ? in_dim : layers.back().width;
}

Array& ParamStore::require(const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

const Array& ParamStore::require(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

void ParamStore::add(const std::string& name, Array a) {
  if (params.count(name)) throw ContractError("duplicate parameter: " + name);
  a.requires_grad = true;
  params.emplace(name, std::move(a));
}

void adam_step(ParamStore& store, const GradMap& grads, double lr, double beta1, double beta2,
               double eps) {
  for (auto& [name, p] : store.params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw ContractError("adam_step: missing gradient for " + name);
    const std::vector<double>& g = git->second;
    if (g.size() != p.numel())
      throw ContractError("adam_step: gradient size mismatch for " + name);
    AdamState& st = store.adam[name];
    if (st.m.numel() != p.numel()) {
      st.m = Array(p.shape, 0.0);
      st.v = Array(p.shape, 0.0);
      st.step = 0;
    }
    st.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
    for (std::size_t k = 0; k < p.numel(); ++k) {
      st.m.values[k] = beta1 * st.m.values[k] + (1.0 - beta1) * g[k];
      st.v.values[k] = beta2 * st.v.values[k] + (1.0 - beta2) * g[k] * g[k];
      const double mhat = st.m.values[k] / bc1;
      const double vhat = st.v.values[k] / bc2;
      p.values[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

Var Binding::param(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  Array a = store_->require(name);
  a.requires_grad = true;
  Var v = graph_->input(std::move(a));
  bound_.emplace(name, v);
  return v;
}

BnStats* Binding::bn_stats(const std::string& name) { return &store_->bn[name]; }

GradMap Binding::collect_grads() const {
  GradMap out;
  for (const auto& [name, var] : bound_) {
    const Array& p = store_->require(name);
    try {
      out[name] = graph_->grad(var);
    } catch (const ContractError&) {
      out[name] = std::vector<double>(p.numel(), 0.0);  // unreached by the loss
    }
  }
  return out;
}

void Mlp::init(ParamStore& store, Rng& rng) const {
  int in = in_dim_;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const MlpLayer& ly = spec_.layers[i];
    const std::string base = prefix_ + "." + std::to_string(i);
    if (!store.has(base + ".w")) {
      Array w(Shape{in, ly.width});
      const double bound = std::sqrt(6.0 / (in + ly.width));
      for (double& v : w.values) v = rng.uniform(-bound, bound);
      store.add(base + ".w", std::move(w));
      store.add(base + ".b", Array(Shape{ly.width}, 0.0));
      if (ly.batchnorm) {
        store.add(base + ".gamma", Array(Shape{ly.width}, 1.0));
        store.add(base + ".beta", Array(Shape{ly.width}, 0.0));
      }
    }
    in = ly.width;
  }
}

Var Mlp::forward(Binding& ctx, Var x) const {
  Graph& g = ctx.graph();
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const MlpLayer& ly = spec_.layers[i];
    const std::string base = prefix_ + "." + std::to_string(i);
    x = g.linear(x, ctx.param(base + ".w"), ctx.param(base + ".b"));
    if (ly.batchnorm)
      x = g.batchnorm(x, ctx.param(base + ".gamma"), ctx.param(base + ".beta"), 1e-5,
                      ctx.training(), ctx.bn_stats(base + ".bn"));
    if (ly.relu) x = g.relu(x);
  }
  return x;
}

}  // namespace p2b::diffcore
