#pragma once

#include <string>
#include <vector>

#include "p2b/diffcore/nn.hpp"
#include "p2b/pcops/kernels.hpp"

namespace p2b::backbone {

struct SaLayer {
  double radius = 0.3;
  int group_size = 32;
  std::vector<int> mlp;  // per-point widths, each FC + BN + ReLU
};

// Three set-abstraction layers, random sampling, half-size down-sampling,
// no upsampling path.
struct BackboneConfig {
  std::vector<SaLayer> layers;

  static BackboneConfig paper();
  // Same structure with widths scaled to a feature dimension d1 (desk runs).
  static BackboneConfig scaled(int d1, int group_size);

  int out_dim() const { return layers.back().mlp.back(); }
};

// Sampled points with attached features living in the active graph.
struct SeedSet {
  std::vector<pcops::Vec3> positions;
  diffcore::Var features;  // [M x d]
};

// Pinned centroid draws, one index list per layer (indices into the previous
// level's point list). Lets tests and gradient checks fix the discrete
// sampling decisions across forward passes.
struct SaPlan {
  std::vector<std::vector<int>> centroid_indices;
};

void init_params(diffcore::ParamStore& store, const BackboneConfig& cfg,
                 const std::string& prefix, Rng& rng);

// One sampling + grouping + per-point MLP + maxpool layer.
SeedSet set_abstraction(diffcore::Binding& ctx, const std::vector<pcops::Vec3>& positions,
                        diffcore::Var features, const SaLayer& layer, int output_count,
                        const std::string& prefix, Rng& rng,
                        const std::vector<int>* pinned_centroids = nullptr,
                        std::vector<int>* centroids_out = nullptr);

// Full encoder: |cloud| points -> |cloud|/8 seeds with cfg.out_dim() features.
SeedSet encode(diffcore::Binding& ctx, const pcops::PointCloud& cloud,
               const BackboneConfig& cfg, const std::string& prefix, Rng rng,
               const SaPlan* pinned = nullptr, SaPlan* plan_out = nullptr);

}  // namespace p2b::backbone
