#include "p2b/diffcore/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "p2b/common.hpp"

namespace p2b::diffcore {

namespace {

// y[B x m] += x[B x n] @ w[n x m]
void mm_nn_acc(const double* x, const double* w, double* y, int B, int n, int m) {
  for (int b = 0; b < B; ++b) {
    const double* xr = x + static_cast<std::size_t>(b) * n;
    double* yr = y + static_cast<std::size_t>(b) * m;
    for (int k = 0; k < n; ++k) {
      const double xv = xr[k];
      if (xv == 0.0) continue;
      const double* wr = w + static_cast<std::size_t>(k) * m;
      for (int j = 0; j < m; ++j) yr[j] += xv * wr[j];
    }
  }
}

// y[B x n] += a[B x m] @ b[n x m]^T   (row-by-row dot products)
void mm_nt_acc(const double* a, const double* b, double* y, int B, int m, int n) {
  for (int i = 0; i < B; ++i) {
    const double* ar = a + static_cast<std::size_t>(i) * m;
    double* yr = y + static_cast<std::size_t>(i) * n;
    for (int k = 0; k < n; ++k) {
      const double* br = b + static_cast<std::size_t>(k) * m;
      double acc = 0.0;
      for (int j = 0; j < m; ++j) acc += ar[j] * br[j];
      yr[k] += acc;
    }
  }
}

// y[n x m] += x[B x n]^T @ d[B x m]
void mm_tn_acc(const double* x, const double* d, double* y, int B, int n, int m) {
  for (int b = 0; b < B; ++b) {
    const double* xr = x + static_cast<std::size_t>(b) * n;
    const double* dr = d + static_cast<std::size_t>(b) * m;
    for (int k = 0; k < n; ++k) {
      const double xv = xr[k];
      if (xv == 0.0) continue;
      double* yr = y + static_cast<std::size_t>(k) * m;
      for (int j = 0; j < m; ++j) yr[j] += xv * dr[j];
    }
  }
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// softplus(z) - z*y, the stable form of -y*log(s) - (1-y)*log(1-s).
double bce_term(double z, double y) {
  const double sp = std::log1p(std::exp(-std::fabs(z))) + std::max(z, 0.0);
  return sp - z * y;
}

constexpr double kLogitClip = 20.0;
// Rows below this norm divide by the floor instead, so normalization stays
// continuous through zero (a vanishing row maps to a vanishing row).
constexpr double kNormFloor = 1e-6;

}  // namespace

Graph::Node& Graph::node(Var v) {
  if (v.g != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw ContractError("Var does not belong to this graph");
  return *nodes_[v.id];
}

const Graph::Node& Graph::node(Var v) const {
  if (v.g != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw ContractError("Var does not belong to this graph");
  return *nodes_[v.id];
}

Var Graph::record(Array value, std::vector<int> parents, std::function<void(Graph&)> backprop) {
  auto n = std::make_unique<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->backprop = std::move(backprop);
  for (int p : n->parents)
    if (nodes_[p]->needs_grad) n->needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

std::vector<double>& Graph::grad_buf(int id) {
  Node& n = *nodes_[id];
  if (n.grad.size() != n.value.numel()) n.grad.assign(n.value.numel(), 0.0);
  return n.grad;
}

Var Graph::input(Array a) {
  bool rg = a.requires_grad;
  Var v = record(std::move(a), {}, nullptr);
  nodes_[v.id]->needs_grad = rg;
  return v;
}

Var Graph::constant(Array a) {
  a.requires_grad = false;
  return record(std::move(a), {}, nullptr);
}

const Array& Graph::value(Var v) const { return node(v).value; }

const std::vector<double>& Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() != n.value.numel())
    throw ContractError("gradient not populated; call backward first");
  return n.grad;
}

void Graph::backward(Var loss) {
  Node& ln = node(loss);
  if (ln.value.numel() != 1)
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(ln.value.shape));
  if (consumed_) throw ContractError("backward: graph already consumed");
  consumed_ = true;

  // Reachability from the loss through parent edges.
  std::vector<char> reach(nodes_.size(), 0);
  reach[loss.id] = 1;
  for (int i = loss.id; i >= 0; --i) {
    if (!reach[i]) continue;
    for (int p : nodes_[i]->parents) reach[p] = 1;
  }
  grad_buf(loss.id)[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = *nodes_[i];
    if (!reach[i] || !n.needs_grad || !n.backprop) continue;
    if (n.grad.empty()) continue;  // never received gradient
    n.backprop(*this);
  }
}

Var Graph::linear(Var xv, Var wv, Var bv) {
  const Array& x = node(xv).value;
  const Array& w = node(wv).value;
  const Array& b = node(bv).value;
  if (x.shape.size() != 2 || w.shape.size() != 2)
    throw ContractError("linear: 2-D operands required, got " + shape_str(x.shape) + " and " +
                        shape_str(w.shape));
  const int B = x.rows(), n = x.cols(), m = w.cols();
  if (w.rows() != n)
    throw ContractError("linear: inner dimensions disagree, x " + shape_str(x.shape) + " vs w " +
                        shape_str(w.shape));
  if (static_cast<int>(b.numel()) != m)
    throw ContractError("linear: bias " + shape_str(b.shape) + " does not match w " +
                        shape_str(w.shape));
  Array y(Shape{B, m});
  for (int i = 0; i < B; ++i)
    std::memcpy(y.values.data() + static_cast<std::size_t>(i) * m, b.values.data(),
                sizeof(double) * m);
  mm_nn_acc(x.values.data(), w.values.data(), y.values.data(), B, n, m);

  int xi = xv.id, wi = wv.id, bi = bv.id;
  Var out = record(std::move(y), {xi, wi, bi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [xi, wi, bi, oi, B, n, m](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;  // B x m
    const auto& x2 = g.nodes_[xi]->value;
    const auto& w2 = g.nodes_[wi]->value;
    if (g.nodes_[xi]->needs_grad) {
      auto& dx = g.grad_buf(xi);  // B x n += dy @ w^T
      mm_nt_acc(dy.data(), w2.values.data(), dx.data(), B, m, n);
    }
    if (g.nodes_[wi]->needs_grad) {
      auto& dw = g.grad_buf(wi);  // n x m += x^T @ dy
      mm_tn_acc(x2.values.data(), dy.data(), dw.data(), B, n, m);
    }
    if (g.nodes_[bi]->needs_grad) {
      auto& db = g.grad_buf(bi);  // m += column sums of dy
      for (int i = 0; i < B; ++i)
        for (int j = 0; j < m; ++j) db[j] += dy[static_cast<std::size_t>(i) * m + j];
    }
  };
  return out;
}

Var Graph::relu(Var xv) {
  const Array& x = node(xv).value;
  Array y = x;
  y.requires_grad = false;
  for (double& v : y.values) v = std::max(0.0, v);
  int xi = xv.id;
  Var out = record(std::move(y), {xi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [xi, oi](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;
    const auto& xvals = g.nodes_[xi]->value.values;
    auto& dx = g.grad_buf(xi);
    for (std::size_t k = 0; k < dx.size(); ++k)
      if (xvals[k] > 0.0) dx[k] += dy[k];
  };
  return out;
}

Var Graph::sigmoid(Var xv) {
  const Array& x = node(xv).value;
  Array y = x;
  y.requires_grad = false;
  for (double& v : y.values) v = stable_sigmoid(v);
  int xi = xv.id;
  Var out = record(std::move(y), {xi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [xi, oi](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;
    const auto& yv = g.nodes_[oi]->value.values;
    auto& dx = g.grad_buf(xi);
    for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += dy[k] * yv[k] * (1.0 - yv[k]);
  };
  return out;
}

Var Graph::batchnorm(Var xv, Var gv, Var bv, double eps, bool training, BnStats* stats) {
  const Array& x = node(xv).value;
  if (x.shape.size() != 2) throw ContractError("batchnorm: 2-D input required");
  const int B = x.rows(), m = x.cols();
  if (B == 0) throw ContractError("batchnorm: empty batch");
  if (eps <= 0.0) throw ContractError("batchnorm: eps must be positive");
  const Array& gamma = node(gv).value;
  const Array& beta = node(bv).value;
  if (static_cast<int>(gamma.numel()) != m || static_cast<int>(beta.numel()) != m)
    throw ContractError("batchnorm: gamma/beta size does not match features");

  std::vector<double> mean(m), invstd(m);
  if (training || stats == nullptr || !stats->warmed) {
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int i = 0; i < B; ++i) s += x.at(i, j);
      mean[j] = s / B;
    }
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int i = 0; i < B; ++i) {
        const double d = x.at(i, j) - mean[j];
        s += d * d;
      }
      invstd[j] = 1.0 / std::sqrt(s / B + eps);
    }
    if (training && stats != nullptr) {
      if (stats->mean.size() != static_cast<std::size_t>(m)) {
        stats->mean.assign(m, 0.0);
        stats->var.assign(m, 1.0);
      }
      const double mom = stats->warmed ? stats->momentum : 0.0;
      for (int j = 0; j < m; ++j) {
        const double var = 1.0 / (invstd[j] * invstd[j]) - eps;
        stats->mean[j] = mom * stats->mean[j] + (1.0 - mom) * mean[j];
        stats->var[j] = mom * stats->var[j] + (1.0 - mom) * var;
      }
      stats->warmed = true;
    }
  } else {
    for (int j = 0; j < m; ++j) {
      mean[j] = stats->mean[j];
      invstd[j] = 1.0 / std::sqrt(stats->var[j] + eps);
    }
  }

  auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(B) * m);
  Array y(Shape{B, m});
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < m; ++j) {
      const double h = (x.at(i, j) - mean[j]) * invstd[j];
      (*xhat)[static_cast<std::size_t>(i) * m + j] = h;
      y.at(i, j) = gamma.values[j] * h + beta.values[j];
    }

  const bool batch_mode = training || stats == nullptr || !stats->warmed;
  int xi = xv.id, gi = gv.id, bi = bv.id;
  Var out = record(std::move(y), {xi, gi, bi}, nullptr);
  int oi = out.id;
  auto inv = std::make_shared<std::vector<double>>(std::move(invstd));
  nodes_[oi]->backprop = [xi, gi, bi, oi, B, m, xhat, inv, batch_mode](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;
    const auto& gamma = g.nodes_[gi]->value.values;
    auto& dgamma = g.grad_buf(gi);
    auto& dbeta = g.grad_buf(bi);
    auto& dx = g.grad_buf(xi);
    for (int j = 0; j < m; ++j) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int i = 0; i < B; ++i) {
        const std::size_t k = static_cast<std::size_t>(i) * m + j;
        sum_dy += dy[k];
        sum_dy_xhat += dy[k] * (*xhat)[k];
      }
      dgamma[j] += sum_dy_xhat;
      dbeta[j] += sum_dy;
      const double gj = gamma[j] * (*inv)[j];
      if (batch_mode) {
        const double mdy = sum_dy / B, mdyx = sum_dy_xhat / B;
        for (int i = 0; i < B; ++i) {
          const std::size_t k = static_cast<std::size_t>(i) * m + j;
          dx[k] += gj * (dy[k] - mdy - (*xhat)[k] * mdyx);
        }
      } else {
        for (int i = 0; i < B; ++i) {
          const std::size_t k = static_cast<std::size_t>(i) * m + j;
          dx[k] += gj * dy[k];
        }
      }
    }
  };
  return out;
}

Var Graph::maxpool_groups(Var xv, int group_size) {
  const Array& x = node(xv).value;
  if (x.shape.size() != 2) throw ContractError("maxpool: 2-D input required");
  const int rows = x.rows(), d = x.cols();
  if (group_size < 1 || rows % group_size != 0)
    throw ContractError("maxpool: rows " + std::to_string(rows) + " not divisible by group size " +
                        std::to_string(group_size));
  const int G = rows / group_size;
  if (rows == 0) throw ContractError("maxpool: empty set");

  Array y(Shape{G, d});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(G) * d);
  for (int gidx = 0; gidx < G; ++gidx) {
    for (int j = 0; j < d; ++j) {
      int best = gidx * group_size;
      double bv = x.at(best, j);
      for (int r = 1; r < group_size; ++r) {
        const int row = gidx * group_size + r;
        // first index wins ties
        if (x.at(row, j) > bv) {
          bv = x.at(row, j);
          best = row;
        }
      }
      y.at(gidx, j) = bv;
      (*argmax)[static_cast<std::size_t>(gidx) * d + j] = best;
    }
  }
  int xi = xv.id;
  Var out = record(std::move(y), {xi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [xi, oi, G, d, argmax](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;
    auto& dx = g.grad_buf(xi);
    for (int gi2 = 0; gi2 < G; ++gi2)
      for (int j = 0; j < d; ++j) {
        const std::size_t k = static_cast<std::size_t>(gi2) * d + j;
        dx[static_cast<std::size_t>((*argmax)[k]) * d + j] += dy[k];
      }
  };
  return out;
}

Var Graph::maxpool_set(Var x) {
  const Array& a = node(x).value;
  return maxpool_groups(x, a.rows());
}

Var Graph::gather_rows(Var xv, std::vector<int> indices) {
  const Array& x = node(xv).value;
  if (x.shape.size() != 2) throw ContractError("gather_rows: 2-D input required");
  const int d = x.cols(), rows = x.rows();
  Array y(Shape{static_cast<int>(indices.size()), d});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int r = indices[i];
    if (r < 0 || r >= rows) throw ContractError("gather_rows: index out of range");
    std::memcpy(y.values.data() + i * d, x.values.data() + static_cast<std::size_t>(r) * d,
                sizeof(double) * d);
  }
  int xi = xv.id;
  auto idx = std::make_shared<std::vector<int>>(std::move(indices));
  Var out = record(std::move(y), {xi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [xi, oi, d, idx](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;
    auto& dx = g.grad_buf(xi);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      const double* src = dy.data() + i * d;
      double* dst = dx.data() + static_cast<std::size_t>((*idx)[i]) * d;
      for (int j = 0; j < d; ++j) dst[j] += src[j];
    }
  };
  return out;
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const int rows = node(parts[0]).value.rows();
  int total = 0;
  for (Var p : parts) {
    const Array& a = node(p).value;
    if (a.rows() != rows) throw ContractError("concat_cols: row counts disagree");
    total += a.cols();
  }
  Array y(Shape{rows, total});
  std::vector<int> offsets;
  std::vector<int> widths;
  std::vector<int> pids;
  int off = 0;
  for (Var p : parts) {
    const Array& a = node(p).value;
    const int w = a.cols();
    for (int i = 0; i < rows; ++i)
      std::memcpy(y.values.data() + static_cast<std::size_t>(i) * total + off,
                  a.values.data() + static_cast<std::size_t>(i) * w, sizeof(double) * w);
    offsets.push_back(off);
    widths.push_back(w);
    pids.push_back(p.id);
    off += w;
  }
  Var out = record(std::move(y), pids, nullptr);
  int oi = out.id;
  auto offs = std::make_shared<std::vector<int>>(std::move(offsets));
  auto wids = std::make_shared<std::vector<int>>(std::move(widths));
  auto ids = std::make_shared<std::vector<int>>(std::move(pids));
  nodes_[oi]->backprop = [oi, rows, total, offs, wids, ids](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;
    for (std::size_t p = 0; p < ids->size(); ++p) {
      if (!g.nodes_[(*ids)[p]]->needs_grad) continue;
      auto& dx = g.grad_buf((*ids)[p]);
      const int w = (*wids)[p], o = (*offs)[p];
      for (int i = 0; i < rows; ++i) {
        const double* src = dy.data() + static_cast<std::size_t>(i) * total + o;
        double* dst = dx.data() + static_cast<std::size_t>(i) * w;
        for (int j = 0; j < w; ++j) dst[j] += src[j];
      }
    }
  };
  return out;
}

Var Graph::slice_cols(Var xv, int begin, int end) {
  const Array& x = node(xv).value;
  const int rows = x.rows(), cols = x.cols();
  if (begin < 0 || end > cols || begin >= end)
    throw ContractError("slice_cols: bad range [" + std::to_string(begin) + ", " +
                        std::to_string(end) + ") for " + shape_str(x.shape));
  const int w = end - begin;
  Array y(Shape{rows, w});
  for (int i = 0; i < rows; ++i)
    std::memcpy(y.values.data() + static_cast<std::size_t>(i) * w,
                x.values.data() + static_cast<std::size_t>(i) * cols + begin, sizeof(double) * w);
  int xi = xv.id;
  Var out = record(std::move(y), {xi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [xi, oi, rows, cols, begin, w](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;
    auto& dx = g.grad_buf(xi);
    for (int i = 0; i < rows; ++i) {
      const double* src = dy.data() + static_cast<std::size_t>(i) * w;
      double* dst = dx.data() + static_cast<std::size_t>(i) * cols + begin;
      for (int j = 0; j < w; ++j) dst[j] += src[j];
    }
  };
  return out;
}

Var Graph::reshape(Var xv, Shape shape) {
  const Array& x = node(xv).value;
  if (shape_numel(shape) != x.numel())
    throw ContractError("reshape: " + shape_str(x.shape) + " to " + shape_str(shape) +
                        " changes element count");
  Array y = x;
  y.requires_grad = false;
  y.shape = std::move(shape);
  int xi = xv.id;
  Var out = record(std::move(y), {xi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [xi, oi](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;
    auto& dx = g.grad_buf(xi);
    for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += dy[k];
  };
  return out;
}

Var Graph::add(Var xv, Var yv) {
  const Array& x = node(xv).value;
  const Array& y = node(yv).value;
  if (x.shape != y.shape)
    throw ContractError("add: shapes disagree, " + shape_str(x.shape) + " vs " +
                        shape_str(y.shape));
  Array z = x;
  z.requires_grad = false;
  for (std::size_t k = 0; k < z.values.size(); ++k) z.values[k] += y.values[k];
  int xi = xv.id, yi = yv.id;
  Var out = record(std::move(z), {xi, yi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [xi, yi, oi](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;
    if (g.nodes_[xi]->needs_grad) {
      auto& dx = g.grad_buf(xi);
      for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += dy[k];
    }
    if (g.nodes_[yi]->needs_grad) {
      auto& d2 = g.grad_buf(yi);
      for (std::size_t k = 0; k < d2.size(); ++k) d2[k] += dy[k];
    }
  };
  return out;
}

Var Graph::sub(Var xv, Var yv) {
  const Array& x = node(xv).value;
  const Array& y = node(yv).value;
  if (x.shape != y.shape)
    throw ContractError("sub: shapes disagree, " + shape_str(x.shape) + " vs " +
                        shape_str(y.shape));
  Array z = x;
  z.requires_grad = false;
  for (std::size_t k = 0; k < z.values.size(); ++k) z.values[k] -= y.values[k];
  int xi = xv.id, yi = yv.id;
  Var out = record(std::move(z), {xi, yi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [xi, yi, oi](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;
    if (g.nodes_[xi]->needs_grad) {
      auto& dx = g.grad_buf(xi);
      for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += dy[k];
    }
    if (g.nodes_[yi]->needs_grad) {
      auto& d2 = g.grad_buf(yi);
      for (std::size_t k = 0; k < d2.size(); ++k) d2[k] -= dy[k];
    }
  };
  return out;
}

Var Graph::mul(Var xv, Var yv) {
  const Array& x = node(xv).value;
  const Array& y = node(yv).value;
  if (x.shape != y.shape)
    throw ContractError("mul: shapes disagree, " + shape_str(x.shape) + " vs " +
                        shape_str(y.shape));
  Array z = x;
  z.requires_grad = false;
  for (std::size_t k = 0; k < z.values.size(); ++k) z.values[k] *= y.values[k];
  int xi = xv.id, yi = yv.id;
  Var out = record(std::move(z), {xi, yi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [xi, yi, oi](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;
    const auto& xa = g.nodes_[xi]->value.values;
    const auto& ya = g.nodes_[yi]->value.values;
    if (g.nodes_[xi]->needs_grad) {
      auto& dx = g.grad_buf(xi);
      for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += dy[k] * ya[k];
    }
    if (g.nodes_[yi]->needs_grad) {
      auto& d2 = g.grad_buf(yi);
      for (std::size_t k = 0; k < d2.size(); ++k) d2[k] += dy[k] * xa[k];
    }
  };
  return out;
}

Var Graph::scale(Var xv, double c) {
  Array z = node(xv).value;
  z.requires_grad = false;
  for (double& v : z.values) v *= c;
  int xi = xv.id;
  Var out = record(std::move(z), {xi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [xi, oi, c](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;
    auto& dx = g.grad_buf(xi);
    for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += c * dy[k];
  };
  return out;
}

Var Graph::l2_normalize_rows(Var xv) {
  const Array& x = node(xv).value;
  const int rows = x.rows(), d = x.cols();
  Array y(Shape{rows, d});
  auto norms = std::make_shared<std::vector<double>>(rows);
  for (int i = 0; i < rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += x.at(i, j) * x.at(i, j);
    const double nrm = std::sqrt(s);
    (*norms)[i] = nrm;
    const double denom = std::max(nrm, kNormFloor);
    for (int j = 0; j < d; ++j) y.at(i, j) = x.at(i, j) / denom;
  }
  int xi = xv.id;
  Var out = record(std::move(y), {xi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [xi, oi, rows, d, norms](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;
    const auto& yv = g.nodes_[oi]->value;
    auto& dx = g.grad_buf(xi);
    for (int i = 0; i < rows; ++i) {
      const double nrm = (*norms)[i];
      if (nrm < kNormFloor) {  // linear branch: y = x / floor
        for (int j = 0; j < d; ++j)
          dx[static_cast<std::size_t>(i) * d + j] +=
              dy[static_cast<std::size_t>(i) * d + j] / kNormFloor;
        continue;
      }
      double dot = 0.0;
      for (int j = 0; j < d; ++j) dot += yv.at(i, j) * dy[static_cast<std::size_t>(i) * d + j];
      for (int j = 0; j < d; ++j)
        dx[static_cast<std::size_t>(i) * d + j] +=
            (dy[static_cast<std::size_t>(i) * d + j] - yv.at(i, j) * dot) / nrm;
    }
  };
  return out;
}

Var Graph::matmul_nt(Var av, Var bv) {
  const Array& a = node(av).value;
  const Array& b = node(bv).value;
  if (a.cols() != b.cols())
    throw ContractError("matmul_nt: inner dimensions disagree, " + shape_str(a.shape) + " vs " +
                        shape_str(b.shape));
  const int J = a.rows(), d = a.cols(), I = b.rows();
  Array y(Shape{J, I});
  mm_nt_acc(a.values.data(), b.values.data(), y.values.data(), J, d, I);
  int ai = av.id, bi = bv.id;
  Var out = record(std::move(y), {ai, bi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [ai, bi, oi, J, d, I](Graph& g) {
    const auto& dy = g.nodes_[oi]->grad;  // J x I
    const auto& a2 = g.nodes_[ai]->value;
    const auto& b2 = g.nodes_[bi]->value;
    if (g.nodes_[ai]->needs_grad) {
      auto& da = g.grad_buf(ai);  // J x d += dy @ b
      mm_nn_acc(dy.data(), b2.values.data(), da.data(), J, I, d);
    }
    if (g.nodes_[bi]->needs_grad) {
      auto& db = g.grad_buf(bi);  // I x d += dy^T @ a
      mm_tn_acc(dy.data(), a2.values.data(), db.data(), J, I, d);
    }
  };
  return out;
}

Var Graph::sum(Var xv) {
  const Array& x = node(xv).value;
  double s = 0.0;
  for (double v : x.values) s += v;
  int xi = xv.id;
  Var out = record(make_scalar(s), {xi}, nullptr);
  int oi = out.id;
  nodes_[oi]->backprop = [xi, oi](Graph& g) {
    const double dy = g.nodes_[oi]->grad[0];
    auto& dx = g.grad_buf(xi);
    for (double& v : dx) v += dy;
  };
  return out;
}

Var Graph::wsum(const std::vector<Var>& scalars, const std::vector<double>& weights) {
  if (scalars.size() != weights.size()) throw ContractError("wsum: size mismatch");
  double s = 0.0;
  std::vector<int> pids;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    const Array& a = node(scalars[i]).value;
    if (a.numel() != 1) throw ContractError("wsum: non-scalar term");
    s += weights[i] * a.values[0];
    pids.push_back(scalars[i].id);
  }
  Var out = record(make_scalar(s), pids, nullptr);
  int oi = out.id;
  auto ids = std::make_shared<std::vector<int>>(std::move(pids));
  auto ws = std::make_shared<std::vector<double>>(weights);
  nodes_[oi]->backprop = [oi, ids, ws](Graph& g) {
    const double dy = g.nodes_[oi]->grad[0];
    for (std::size_t i = 0; i < ids->size(); ++i) {
      if (!g.nodes_[(*ids)[i]]->needs_grad) continue;
      g.grad_buf((*ids)[i])[0] += (*ws)[i] * dy;
    }
  };
  return out;
}

namespace {
double count_nonzero(const std::vector<double>& m) {
  double c = 0.0;
  for (double v : m)
    if (v != 0.0) c += 1.0;
  return c;
}
}  // namespace

Var Graph::masked_l1_mean(Var predv, const Array& target, const std::vector<double>& mask) {
  const Array& pred = node(predv).value;
  if (pred.shape != target.shape)
    throw ContractError("masked_l1_mean: prediction " + shape_str(pred.shape) +
                        " vs target " + shape_str(target.shape));
  const int rows = pred.rows(), cols = pred.cols();
  if (static_cast<int>(mask.size()) != rows) throw ContractError("masked_l1_mean: mask size");
  const double cnt = count_nonzero(mask);
  double loss = 0.0;
  if (cnt > 0.0) {
    for (int i = 0; i < rows; ++i) {
      if (mask[i] == 0.0) continue;
      for (int j = 0; j < cols; ++j) loss += std::fabs(pred.at(i, j) - target.at(i, j));
    }
    loss /= cnt;
  }
  int pi = predv.id;
  Var out = record(make_scalar(loss), {pi}, nullptr);
  int oi = out.id;
  auto tgt = std::make_shared<Array>(target);
  auto msk = std::make_shared<std::vector<double>>(mask);
  nodes_[oi]->backprop = [pi, oi, rows, cols, cnt, tgt, msk](Graph& g) {
    if (cnt == 0.0) return;
    const double dy = g.nodes_[oi]->grad[0];
    const auto& pred = g.nodes_[pi]->value;
    auto& dx = g.grad_buf(pi);
    for (int i = 0; i < rows; ++i) {
      if ((*msk)[i] == 0.0) continue;
      for (int j = 0; j < cols; ++j) {
        const double r = pred.at(i, j) - tgt->at(i, j);
        const double s = (r > 0.0) ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        dx[static_cast<std::size_t>(i) * cols + j] += dy * s / cnt;
      }
    }
  };
  return out;
}

Var Graph::masked_l2_mean(Var predv, const Array& target, const std::vector<double>& mask) {
  const Array& pred = node(predv).value;
  if (pred.shape != target.shape) throw ContractError("masked_l2_mean: shape mismatch");
  const int rows = pred.rows(), cols = pred.cols();
  if (static_cast<int>(mask.size()) != rows) throw ContractError("masked_l2_mean: mask size");
  const double cnt = count_nonzero(mask);
  double loss = 0.0;
  if (cnt > 0.0) {
    for (int i = 0; i < rows; ++i) {
      if (mask[i] == 0.0) continue;
      for (int j = 0; j < cols; ++j) {
        const double r = pred.at(i, j) - target.at(i, j);
        loss += r * r;
      }
    }
    loss /= cnt;
  }
  int pi = predv.id;
  Var out = record(make_scalar(loss), {pi}, nullptr);
  int oi = out.id;
  auto tgt = std::make_shared<Array>(target);
  auto msk = std::make_shared<std::vector<double>>(mask);
  nodes_[oi]->backprop = [pi, oi, rows, cols, cnt, tgt, msk](Graph& g) {
    if (cnt == 0.0) return;
    const double dy = g.nodes_[oi]->grad[0];
    const auto& pred = g.nodes_[pi]->value;
    auto& dx = g.grad_buf(pi);
    for (int i = 0; i < rows; ++i) {
      if ((*msk)[i] == 0.0) continue;
      for (int j = 0; j < cols; ++j) {
        const double r = pred.at(i, j) - tgt->at(i, j);
        dx[static_cast<std::size_t>(i) * cols + j] += dy * 2.0 * r / cnt;
      }
    }
  };
  return out;
}

Var Graph::bce_logits_mean(Var logitsv, const std::vector<double>& labels,
                           const std::vector<double>& select) {
  const Array& z = node(logitsv).value;
  const std::size_t n = z.numel();
  if (labels.size() != n || select.size() != n)
    throw ContractError("bce_logits_mean: label/select size mismatch");
  const double cnt = count_nonzero(select);
  double loss = 0.0;
  if (cnt > 0.0) {
    for (std::size_t k = 0; k < n; ++k) {
      if (select[k] == 0.0) continue;
      const double zc = std::clamp(z.values[k], -kLogitClip, kLogitClip);
      loss += bce_term(zc, labels[k]);
    }
    loss /= cnt;
  }
  int zi = logitsv.id;
  Var out = record(make_scalar(loss), {zi}, nullptr);
  int oi = out.id;
  auto lab = std::make_shared<std::vector<double>>(labels);
  auto sel = std::make_shared<std::vector<double>>(select);
  nodes_[oi]->backprop = [zi, oi, cnt, lab, sel](Graph& g) {
    if (cnt == 0.0) return;
    const double dy = g.nodes_[oi]->grad[0];
    const auto& z2 = g.nodes_[zi]->value.values;
    auto& dx = g.grad_buf(zi);
    for (std::size_t k = 0; k < z2.size(); ++k) {
      if ((*sel)[k] == 0.0) continue;
      if (std::fabs(z2[k]) > kLogitClip) continue;  // clipped region
      dx[k] += dy * (stable_sigmoid(z2[k]) - (*lab)[k]) / cnt;
    }
  };
  return out;
}

Var Graph::huber_masked_mean(Var predv, const Array& target, const std::vector<double>& mask,
                             int wrap_col) {
  const Array& pred = node(predv).value;
  if (pred.shape != target.shape) throw ContractError("huber_masked_mean: shape mismatch");
  const int rows = pred.rows(), cols = pred.cols();
  if (static_cast<int>(mask.size()) != rows) throw ContractError("huber_masked_mean: mask size");
  const double cnt = count_nonzero(mask);
  const double denom = cnt * cols;
  double loss = 0.0;
  if (cnt > 0.0) {
    for (int i = 0; i < rows; ++i) {
      if (mask[i] == 0.0) continue;
      for (int j = 0; j < cols; ++j) {
        double r = pred.at(i, j) - target.at(i, j);
        if (j == wrap_col) r = wrap_angle(r);
        const double a = std::fabs(r);
        loss += (a <= 1.0) ? 0.5 * r * r : (a - 0.5);
      }
    }
    loss /= denom;
  }
  int pi = predv.id;
  Var out = record(make_scalar(loss), {pi}, nullptr);
  int oi = out.id;
  auto tgt = std::make_shared<Array>(target);
  auto msk = std::make_shared<std::vector<double>>(mask);
  nodes_[oi]->backprop = [pi, oi, rows, cols, denom, cnt, wrap_col, tgt, msk](Graph& g) {
    if (cnt == 0.0) return;
    const double dy = g.nodes_[oi]->grad[0];
    const auto& pred = g.nodes_[pi]->value;
    auto& dx = g.grad_buf(pi);
    for (int i = 0; i < rows; ++i) {
      if ((*msk)[i] == 0.0) continue;
      for (int j = 0; j < cols; ++j) {
        double r = pred.at(i, j) - tgt->at(i, j);
        if (j == wrap_col) r = wrap_angle(r);
        dx[static_cast<std::size_t>(i) * cols + j] += dy * std::clamp(r, -1.0, 1.0) / denom;
      }
    }
  };
  return out;
}

}  // namespace p2b::diffcore
