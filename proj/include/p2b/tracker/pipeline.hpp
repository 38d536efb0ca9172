#pragma once

#include "p2b/dataio/samples.hpp"
#include "p2b/losses.hpp"

namespace p2b::tracker {

struct PipelineConfig {
  dataio::SampleConfig sample;          // N1/N2, enlargement, jitter bounds
  backbone::BackboneConfig backbone;    // d1 via backbone.out_dim()
  tsfa::TsfaConfig tsfa;                // d2 via tsfa.out_dim
  proposal::ProposalConfig proposal;    // K, R, head widths
  losses::LossWeights weights;
  bool reg_l2 = false;
  double pos_distance = 0.3;
  double neg_distance = 0.6;

  int d1() const { return backbone.out_dim(); }
  int d2() const { return tsfa.out_dim; }

  // Paper constants throughout.
  static PipelineConfig paper();
  // Reduced widths and counts for CPU-scale training runs.
  static PipelineConfig desk();
  // Tiny structural configuration for gradient checks and smoke tests.
  static PipelineConfig micro();
};

struct PipelineParams {
  diffcore::ParamStore store;

  static PipelineParams init(const PipelineConfig& cfg, std::uint64_t seed);
};

// Discrete decisions of one forward pass (sampling draws, clustering).
// Pinning a plan reproduces the pass as a smooth function of the parameters.
struct ForwardPlan {
  backbone::SaPlan template_sa;
  backbone::SaPlan search_sa;
  proposal::ClusterPlan cluster;
  bool has_cluster = false;
};

struct ForwardOutputs {
  backbone::SeedSet template_seeds;
  backbone::SeedSet search_seeds;
  tsfa::AugmentedSeedSet augmented;
  proposal::PotentialCenters centers;
  diffcore::Var seed_logits;  // invalid when the targetness branch is off
  diffcore::Var seed_scores;
  proposal::Proposals proposals;
};

// Encode both branches (shared weights), augment, vote, score, cluster,
// propose. RNG draws are pinned by `pinned` when given and exported through
// `plan_out`.
ForwardOutputs forward(diffcore::Binding& ctx, const pcops::PointCloud& template_cloud,
                       const pcops::PointCloud& search_cloud, const PipelineConfig& cfg,
                       Rng rng, const ForwardPlan* pinned = nullptr,
                       ForwardPlan* plan_out = nullptr);

struct LossBreakdown {
  double total = 0.0;
  double reg = 0.0;
  double cla = 0.0;
  double prop = 0.0;
  double box = 0.0;
  int on_target_seeds = 0;
  int positive_proposals = 0;
};

// Eq-4 style weighted total over the four objectives for one sample.
// Proposal labels and regression anchors are recomputed from current values
// unless `pinned_targets` is given (gradient checks pin them together with
// the forward plan).
diffcore::Var training_loss(diffcore::Binding& ctx, const ForwardOutputs& out,
                            const pcops::Box3D& gt_box, const PipelineConfig& cfg,
                            LossBreakdown* breakdown = nullptr,
                            const losses::ProposalTargets* pinned_targets = nullptr,
                            losses::ProposalTargets* targets_out = nullptr);

}  // namespace p2b::tracker
