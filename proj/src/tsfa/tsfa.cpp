#include "p2b/tsfa.hpp"

#include <cmath>

namespace p2b::tsfa {

using diffcore::Array;
using diffcore::Binding;
using diffcore::Mlp;
using diffcore::MlpSpec;
using diffcore::Shape;
using diffcore::Var;

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Default: return "default";
    case Variant::NoTemplateFeatures: return "no_template_features";
    case Variant::NoSimilarity: return "no_similarity";
    case Variant::SearchFeaturesA: return "search_features_a";
    case Variant::SearchFeaturesB: return "search_features_b";
  }
  return "default";
}

Variant variant_from_string(const std::string& s) {
  if (s == "default") return Variant::Default;
  if (s == "no_template_features") return Variant::NoTemplateFeatures;
  if (s == "no_similarity") return Variant::NoSimilarity;
  if (s == "search_features_a") return Variant::SearchFeaturesA;
  if (s == "search_features_b") return Variant::SearchFeaturesB;
  throw UsageError("unknown tsfa variant: " + s);
}

SimilarityMap similarity_map(const Array& q_features, const Array& r_features) {
  if (q_features.cols() != r_features.cols())
    throw ContractError("similarity_map: feature dimensions disagree");
  const int m1 = q_features.rows(), m2 = r_features.rows(), d = q_features.cols();
  SimilarityMap out;
  out.values = Array(Shape{m2, m1});
  std::vector<double> qn(m1), rn(m2);
  for (int i = 0; i < m1; ++i) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += q_features.at(i, k) * q_features.at(i, k);
    qn[i] = std::sqrt(s);
  }
  for (int j = 0; j < m2; ++j) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += r_features.at(j, k) * r_features.at(j, k);
    rn[j] = std::sqrt(s);
  }
  constexpr double kTol = 1e-12;
  int flagged = 0;
  for (int i = 0; i < m1; ++i)
    if (qn[i] < kTol) ++flagged;
  for (int j = 0; j < m2; ++j)
    if (rn[j] < kTol) ++flagged;
  out.zero_norm_rows = flagged;
  for (int j = 0; j < m2; ++j)
    for (int i = 0; i < m1; ++i) {
      if (qn[i] < kTol || rn[j] < kTol) {
        out.values.at(j, i) = 0.0;  // guarded pair
        continue;
      }
      double dotp = 0.0;
      for (int k = 0; k < d; ++k) dotp += q_features.at(i, k) * r_features.at(j, k);
      out.values.at(j, i) = dotp / (qn[i] * rn[j]);
    }
  return out;
}

Var similarity_var(diffcore::Graph& g, Var q_features, Var r_features) {
  return g.matmul_nt(g.l2_normalize_rows(r_features), g.l2_normalize_rows(q_features));
}

int pre_in_dim(Variant v, int d1) {
  switch (v) {
    case Variant::Default: return 1 + 3 + d1;
    case Variant::NoTemplateFeatures: return 1 + 3;
    case Variant::NoSimilarity: return 3 + d1;
    case Variant::SearchFeaturesA: return 1 + 3 + d1 + d1;
    case Variant::SearchFeaturesB: return 1 + 3 + d1;
  }
  return 1 + 3 + d1;
}

int post_in_dim(Variant v, int d1, int pre_out) {
  return v == Variant::SearchFeaturesB ? pre_out + d1 : pre_out;
}

void init_params(diffcore::ParamStore& store, const TsfaConfig& cfg, int d1,
                 const std::string& prefix, Rng& rng) {
  Mlp pre(prefix + ".pre", pre_in_dim(cfg.variant, d1), MlpSpec::hidden_stack(cfg.pre_widths));
  pre.init(store, rng);
  Mlp post(prefix + ".post", post_in_dim(cfg.variant, d1, cfg.pre_widths.back()),
           MlpSpec::head(cfg.post_hidden, cfg.out_dim));
  post.init(store, rng);
}

AugmentedSeedSet augment(Binding& ctx, const backbone::SeedSet& search,
                         const backbone::SeedSet& templ, Var sim, const TsfaConfig& cfg,
                         const std::string& prefix) {
  diffcore::Graph& g = ctx.graph();
  const int m1 = static_cast<int>(templ.positions.size());
  const int m2 = static_cast<int>(search.positions.size());
  const int d1 = g.value(templ.features).cols();
  const Array& simv = g.value(sim);
  if (simv.rows() != m2 || simv.cols() != m1)
    throw ContractError("augment: similarity map " + diffcore::shape_str(simv.shape) +
                        " does not match M2=" + std::to_string(m2) +
                        ", M1=" + std::to_string(m1));

  const std::size_t rows = static_cast<std::size_t>(m2) * m1;
  // template coordinates tiled across search seeds
  Array xq(Shape{static_cast<int>(rows), 3});
  std::vector<int> tile_q(rows), tile_r(rows);
  for (int j = 0; j < m2; ++j)
    for (int i = 0; i < m1; ++i) {
      const std::size_t r = static_cast<std::size_t>(j) * m1 + i;
      tile_q[r] = i;
      tile_r[r] = j;
      xq.at(static_cast<int>(r), 0) = templ.positions[i].x;
      xq.at(static_cast<int>(r), 1) = templ.positions[i].y;
      xq.at(static_cast<int>(r), 2) = templ.positions[i].z;
    }

  Var sim_col = g.reshape(sim, Shape{static_cast<int>(rows), 1});
  Var xq_var = g.constant(std::move(xq));
  Var fq = g.gather_rows(templ.features, tile_q);

  std::vector<Var> parts;
  switch (cfg.variant) {
    case Variant::Default:
    case Variant::SearchFeaturesB:
      parts = {sim_col, xq_var, fq};
      break;
    case Variant::NoTemplateFeatures:
      parts = {sim_col, xq_var};
      break;
    case Variant::NoSimilarity:
      parts = {xq_var, fq};
      break;
    case Variant::SearchFeaturesA:
      parts = {sim_col, xq_var, fq, g.gather_rows(search.features, tile_r)};
      break;
  }

  Mlp pre(prefix + ".pre", pre_in_dim(cfg.variant, d1), MlpSpec::hidden_stack(cfg.pre_widths));
  Var pooled = g.maxpool_groups(pre.forward(ctx, g.concat_cols(parts)), m1);

  Var post_in = pooled;
  if (cfg.variant == Variant::SearchFeaturesB)
    post_in = g.concat_cols({pooled, search.features});
  Mlp post(prefix + ".post", post_in_dim(cfg.variant, d1, cfg.pre_widths.back()),
           MlpSpec::head(cfg.post_hidden, cfg.out_dim));
  Var out = post.forward(ctx, post_in);
  return AugmentedSeedSet{search.positions, out};
}

}  // namespace p2b::tsfa
