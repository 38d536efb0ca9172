#include "p2b/losses.hpp"

#include <cmath>

namespace p2b::losses {

using diffcore::Array;
using diffcore::Shape;
using diffcore::Var;

FrameTargets make_frame_targets(const pcops::Box3D& gt_box,
                                const std::vector<pcops::Vec3>& seed_positions) {
  FrameTargets t;
  t.gt_box = gt_box;
  const auto mask = pcops::points_in_box(seed_positions, gt_box, 0.0);
  const int m2 = static_cast<int>(seed_positions.size());
  t.seed_mask.assign(m2, 0.0);
  t.vote_targets = Array(Shape{m2, 3});
  for (int j = 0; j < m2; ++j) {
    t.seed_mask[j] = mask[j] ? 1.0 : 0.0;
    if (mask[j]) ++t.on_target_seeds;
    const pcops::Vec3 d = gt_box.center - seed_positions[j];
    t.vote_targets.at(j, 0) = d.x;
    t.vote_targets.at(j, 1) = d.y;
    t.vote_targets.at(j, 2) = d.z;
  }
  return t;
}

Var reg_loss(diffcore::Graph& g, Var offsets, const FrameTargets& targets, bool l2) {
  return l2 ? g.masked_l2_mean(offsets, targets.vote_targets, targets.seed_mask)
            : g.masked_l1_mean(offsets, targets.vote_targets, targets.seed_mask);
}

Var seed_cls_loss(diffcore::Graph& g, Var logits, const std::vector<double>& seed_mask) {
  return g.bce_logits_mean(logits, seed_mask, std::vector<double>(seed_mask.size(), 1.0));
}

ProposalTargets make_proposal_targets(const pcops::Box3D& gt_box, const Array& proposal_centers,
                                      const Array& centroid_positions, bool sincos_heading,
                                      double pos_distance, double neg_distance) {
  const int k = proposal_centers.rows();
  ProposalTargets t;
  t.labels.assign(k, 0.0);
  t.penalized.assign(k, 0.0);
  t.positive.assign(k, 0.0);
  const int cols = sincos_heading ? 5 : 4;
  t.heading_col = sincos_heading ? -1 : 3;
  t.box_targets = Array(Shape{k, cols});
  for (int i = 0; i < k; ++i) {
    const pcops::Vec3 center{proposal_centers.at(i, 0), proposal_centers.at(i, 1),
                             proposal_centers.at(i, 2)};
    const double dist = pcops::norm(center - gt_box.center);
    if (dist < pos_distance) {
      t.labels[i] = 1.0;
      t.penalized[i] = 1.0;
      t.positive[i] = 1.0;
    } else if (dist > neg_distance) {
      t.penalized[i] = 1.0;
    }
    // regression target: offset from the (detached) cluster centroid
    t.box_targets.at(i, 0) = gt_box.center.x - centroid_positions.at(i, 0);
    t.box_targets.at(i, 1) = gt_box.center.y - centroid_positions.at(i, 1);
    t.box_targets.at(i, 2) = gt_box.center.z - centroid_positions.at(i, 2);
    if (sincos_heading) {
      t.box_targets.at(i, 3) = std::sin(gt_box.heading);
      t.box_targets.at(i, 4) = std::cos(gt_box.heading);
    } else {
      t.box_targets.at(i, 3) = gt_box.heading;
    }
  }
  return t;
}

Var proposal_cls_loss(diffcore::Graph& g, Var logits, const ProposalTargets& targets) {
  return g.bce_logits_mean(logits, targets.labels, targets.penalized);
}

Var box_loss(diffcore::Graph& g, Var box_params, const ProposalTargets& targets) {
  return g.huber_masked_mean(box_params, targets.box_targets, targets.positive,
                             targets.heading_col);
}

Var total_loss(diffcore::Graph& g, Var reg, Var cla, Var prop, Var box, const LossWeights& w) {
  std::vector<Var> terms{reg};
  std::vector<double> weights{1.0};
  if (cla.valid()) {
    terms.push_back(cla);
    weights.push_back(w.gamma1);
  }
  terms.push_back(prop);
  weights.push_back(w.gamma2);
  terms.push_back(box);
  weights.push_back(w.gamma3);
  return g.wsum(terms, weights);
}

}  // namespace p2b::losses
