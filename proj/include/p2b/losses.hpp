#pragma once

#include "p2b/proposal.hpp"

namespace p2b::losses {

struct LossWeights {
  double gamma1 = 0.2;  // seed classification
  double gamma2 = 1.5;  // proposal classification
  double gamma3 = 0.2;  // box regression
};

// Per-frame supervision in the search frame. The seed mask comes from
// points_in_box with zero enlargement; vote targets are offsets from each
// seed to the ground-truth center.
struct FrameTargets {
  pcops::Box3D gt_box;
  std::vector<double> seed_mask;   // M2
  diffcore::Array vote_targets;    // M2 x 3
  int on_target_seeds = 0;
};

FrameTargets make_frame_targets(const pcops::Box3D& gt_box,
                                const std::vector<pcops::Vec3>& seed_positions);

// Mean offset-residual norm over on-target seeds (L1 by default, L2 behind
// the flag); 0 when the mask is empty.
diffcore::Var reg_loss(diffcore::Graph& g, diffcore::Var offsets, const FrameTargets& targets,
                       bool l2 = false);

// Mean BCE over all seeds, labels taken from the on-target mask.
diffcore::Var seed_cls_loss(diffcore::Graph& g, diffcore::Var logits,
                            const std::vector<double>& seed_mask);

// Proposal supervision: positives closer than pos_distance to the GT center,
// negatives farther than neg_distance, the rest unpenalized. Targets are
// computed against current (detached) centroid positions.
struct ProposalTargets {
  std::vector<double> labels;    // per proposal
  std::vector<double> penalized;
  std::vector<double> positive;
  diffcore::Array box_targets;   // K x (4|5)
  int heading_col = 3;           // wrap-aware column; -1 for sincos encoding
};

ProposalTargets make_proposal_targets(const pcops::Box3D& gt_box,
                                      const diffcore::Array& proposal_centers,
                                      const diffcore::Array& centroid_positions,
                                      bool sincos_heading, double pos_distance = 0.3,
                                      double neg_distance = 0.6);

// Mean BCE over penalized proposals; 0 when none are penalized.
diffcore::Var proposal_cls_loss(diffcore::Graph& g, diffcore::Var logits,
                                const ProposalTargets& targets);

// Smooth-L1 over positive proposals' box parameters; 0 without positives.
diffcore::Var box_loss(diffcore::Graph& g, diffcore::Var box_params,
                       const ProposalTargets& targets);

// L = L_reg + gamma1 L_cla + gamma2 L_prop + gamma3 L_box
diffcore::Var total_loss(diffcore::Graph& g, diffcore::Var reg, diffcore::Var cla,
                         diffcore::Var prop, diffcore::Var box, const LossWeights& w);

}  // namespace p2b::losses
