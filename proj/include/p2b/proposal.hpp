#pragma once

#include <string>

#include "p2b/tsfa.hpp"

namespace p2b::proposal {

enum class TargetnessMode { Full, NoConcat, NoBranch };

const char* to_string(TargetnessMode m);
TargetnessMode targetness_from_string(const std::string& s);

struct ProposalConfig {
  int cluster_count = 64;        // K
  double cluster_radius = 0.3;   // R, meters
  int cluster_group_size = 16;
  std::vector<int> vote_hidden{256, 256};
  std::vector<int> targetness_hidden{256, 256};
  std::vector<int> theta_pre{256, 256, 256};
  std::vector<int> theta_post_hidden{256, 256};
  bool sincos_heading = false;   // regress (sin, cos) instead of a raw angle
  TargetnessMode targetness = TargetnessMode::Full;

  int box_params() const { return sincos_heading ? 5 : 4; }
  int theta_out() const { return box_params() + 1; }  // + targetness logit
};

// Voted potential target centers: seed positions displaced by the predicted
// offsets, features displaced by the predicted residuals.
struct PotentialCenters {
  diffcore::Var positions;  // M2 x 3
  diffcore::Var offsets;    // M2 x 3 (the raw votes, supervised by reg_loss)
  diffcore::Var features;   // M2 x d2
  int count = 0;
};

void init_params(diffcore::ParamStore& store, const ProposalConfig& cfg, int d2,
                 const std::string& prefix, Rng& rng);

PotentialCenters vote(diffcore::Binding& ctx, const tsfa::AugmentedSeedSet& aug,
                      const ProposalConfig& cfg, const std::string& prefix);

// Seed-wise targetness logits, [M2 x 1].
diffcore::Var seed_targetness(diffcore::Binding& ctx, const tsfa::AugmentedSeedSet& aug,
                              const ProposalConfig& cfg, const std::string& prefix);

// Discrete clustering decisions, computed from current center values and
// reusable across forward passes (gradient checks pin them).
struct ClusterPlan {
  int group_size = 0;
  std::vector<int> centroid_indices;       // K
  std::vector<int> member_indices;         // K * group_size
  std::vector<std::uint8_t> degenerate;
};

ClusterPlan cluster(const diffcore::Array& center_positions, int k, double radius,
                    int group_size, Rng rng);

struct Proposals {
  diffcore::Var box_params;  // K x (4|5): position offsets + heading encoding
  diffcore::Var logits;      // K x 1
  diffcore::Var scores;      // K x 1, sigmoid
  diffcore::Var centers;     // K x 3: cluster centroid + predicted offsets
  std::vector<int> centroid_indices;
  int count = 0;
};

// Theta over member descriptors [s; x_c - centroid; f_c] -> maxpool -> head.
// `scores` may be an invalid Var when the targetness branch is disabled.
Proposals propose(diffcore::Binding& ctx, const PotentialCenters& centers,
                  diffcore::Var scores, const ClusterPlan& plan, const ProposalConfig& cfg,
                  const std::string& prefix);

// Plain-value view of the K proposals as boxes in the search frame. Extents
// come from the template target's box (tracking assumes a fixed object size).
struct ProposalValues {
  std::vector<double> scores;
  std::vector<pcops::Box3D> boxes;
};

ProposalValues materialize(const diffcore::Graph& g, const Proposals& props,
                           const pcops::Box3D& template_box, bool sincos_heading);

// Argmax score; ties break toward the lowest proposal index.
int select_best(const std::vector<double>& scores);

}  // namespace p2b::proposal
