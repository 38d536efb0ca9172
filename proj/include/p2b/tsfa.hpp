#pragma once

#include <string>

#include "p2b/backbone.hpp"

namespace p2b::tsfa {

// Augmentation rows per search seed, before the symmetric pool:
//   Default            [sim; x_q; f_q]
//   NoTemplateFeatures [sim; x_q]
//   NoSimilarity       [x_q; f_q]
//   SearchFeaturesA    [sim; x_q; f_q; f_r]   (search feature duplicated per row)
//   SearchFeaturesB    default rows; f_r concatenated after the pool
enum class Variant { Default, NoTemplateFeatures, NoSimilarity, SearchFeaturesA, SearchFeaturesB };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct TsfaConfig {
  Variant variant = Variant::Default;
  int out_dim = 256;                          // d2
  std::vector<int> pre_widths{256, 256, 256};  // per-row stack feeding the pool
  std::vector<int> post_hidden{256, 256};      // + plain linear final of out_dim
};

struct SimilarityMap {
  diffcore::Array values;  // M2 x M1, cosine similarities
  int zero_norm_rows = 0;  // feature rows with vanishing norm, similarity substituted by 0
};

// Plain-value cosine similarity per Sim[j,i] = <f_qi, f_rj> / (|f_qi||f_rj|).
SimilarityMap similarity_map(const diffcore::Array& q_features, const diffcore::Array& r_features);

// Same map recorded on the tape (row-normalize both sides, then Q R^T).
diffcore::Var similarity_var(diffcore::Graph& g, diffcore::Var q_features,
                             diffcore::Var r_features);

struct AugmentedSeedSet {
  std::vector<pcops::Vec3> positions;  // search seed positions
  diffcore::Var features;              // M2 x d2, target-specific
};

int pre_in_dim(Variant v, int d1);
int post_in_dim(Variant v, int d1, int pre_out);

void init_params(diffcore::ParamStore& store, const TsfaConfig& cfg, int d1,
                 const std::string& prefix, Rng& rng);

// Phi: per-row MLP, maxpool over the template dimension, post MLP.
AugmentedSeedSet augment(diffcore::Binding& ctx, const backbone::SeedSet& search,
                         const backbone::SeedSet& templ, diffcore::Var sim,
                         const TsfaConfig& cfg, const std::string& prefix);

}  // namespace p2b::tsfa
