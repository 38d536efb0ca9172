#pragma once

#include <functional>
#include <string>

#include "p2b/common.hpp"
#include "p2b/diffcore/nn.hpp"

namespace p2b::testutil {

inline diffcore::Array random_array(diffcore::Shape shape, Rng& rng, double lo = -1.0,
                                    double hi = 1.0) {
  diffcore::Array a(std::move(shape));
  for (double& v : a.values) v = rng.uniform(lo, hi);
  return a;
}

struct GradCheck {
  double max_rel = 0.0;
  std::string worst;
};

// Central finite differences over every parameter element. `eval` must run
// a full forward pass against the store and return the scalar loss.
inline GradCheck finite_diff_check(diffcore::ParamStore& store,
                                   const std::function<double(diffcore::ParamStore&)>& eval,
                                   const diffcore::GradMap& analytic, double step = 1e-5) {
  GradCheck res;
  for (auto& [name, p] : store.params) {
    auto it = analytic.find(name);
    if (it == analytic.end()) throw ContractError("finite_diff_check: no gradient for " + name);
    for (std::size_t k = 0; k < p.numel(); ++k) {
      const double keep = p.values[k];
      p.values[k] = keep + step;
      const double up = eval(store);
      p.values[k] = keep - step;
      const double dn = eval(store);
      p.values[k] = keep;
      const double numeric = (up - dn) / (2.0 * step);
      const double a = it->second[k];
      const double rel = std::fabs(a - numeric) / std::max(std::fabs(a) + std::fabs(numeric), 1e-3);
      if (rel > res.max_rel) {
        res.max_rel = rel;
        res.worst = name + "[" + std::to_string(k) + "] analytic=" + std::to_string(a) +
                    " numeric=" + std::to_string(numeric);
      }
    }
  }
  return res;
}

}  // namespace p2b::testutil
