#include "p2b/tracker/pipeline.hpp"

namespace p2b::tracker {

using diffcore::Binding;
using diffcore::Var;

PipelineConfig PipelineConfig::paper() {
  PipelineConfig cfg;
  cfg.sample.template_points = 512;
  cfg.sample.search_points = 1024;
  cfg.backbone = backbone::BackboneConfig::paper();
  cfg.tsfa = tsfa::TsfaConfig{};
  cfg.proposal = proposal::ProposalConfig{};
  return cfg;
}

PipelineConfig PipelineConfig::desk() {
  PipelineConfig cfg;
  cfg.sample.template_points = 128;
  cfg.sample.search_points = 512;  // keeps M2 = 64 so K can reach 64
  cfg.backbone = backbone::BackboneConfig::scaled(32, 12);
  cfg.tsfa.out_dim = 32;
  cfg.tsfa.pre_widths = {32, 32, 32};
  cfg.tsfa.post_hidden = {32, 32};
  cfg.proposal.cluster_count = 64;
  cfg.proposal.cluster_group_size = 8;
  cfg.proposal.vote_hidden = {32, 32};
  cfg.proposal.targetness_hidden = {32, 32};
  cfg.proposal.theta_pre = {32, 32, 32};
  cfg.proposal.theta_post_hidden = {32, 32};
  return cfg;
}

PipelineConfig PipelineConfig::micro() {
  PipelineConfig cfg;
  cfg.sample.template_points = 8;
  cfg.sample.search_points = 16;
  cfg.backbone = backbone::BackboneConfig::scaled(8, 4);
  cfg.tsfa.out_dim = 8;
  cfg.tsfa.pre_widths = {8, 8, 8};
  cfg.tsfa.post_hidden = {8, 8};
  cfg.proposal.cluster_count = 2;
  cfg.proposal.cluster_group_size = 2;
  cfg.proposal.vote_hidden = {8, 8};
  cfg.proposal.targetness_hidden = {8, 8};
  cfg.proposal.theta_pre = {8, 8, 8};
  cfg.proposal.theta_post_hidden = {8, 8};
  return cfg;
}

PipelineParams PipelineParams::init(const PipelineConfig& cfg, std::uint64_t seed) {
  PipelineParams params;
  Rng rng(seed);
  backbone::init_params(params.store, cfg.backbone, "backbone", rng);
  tsfa::init_params(params.store, cfg.tsfa, cfg.d1(), "tsfa", rng);
  proposal::init_params(params.store, cfg.proposal, cfg.d2(), "proposal", rng);
  return params;
}

ForwardOutputs forward(Binding& ctx, const pcops::PointCloud& template_cloud,
                       const pcops::PointCloud& search_cloud, const PipelineConfig& cfg,
                       Rng rng, const ForwardPlan* pinned, ForwardPlan* plan_out) {
  diffcore::Graph& g = ctx.graph();
  ForwardOutputs out;

  // Siamese encoding: one parameter set for both branches.
  out.template_seeds =
      backbone::encode(ctx, template_cloud, cfg.backbone, "backbone", rng.fork(1),
                       pinned ? &pinned->template_sa : nullptr,
                       plan_out ? &plan_out->template_sa : nullptr);
  out.search_seeds =
      backbone::encode(ctx, search_cloud, cfg.backbone, "backbone", rng.fork(2),
                       pinned ? &pinned->search_sa : nullptr,
                       plan_out ? &plan_out->search_sa : nullptr);

  Var sim = tsfa::similarity_var(g, out.template_seeds.features, out.search_seeds.features);
  out.augmented = tsfa::augment(ctx, out.search_seeds, out.template_seeds, sim, cfg.tsfa, "tsfa");

  out.centers = proposal::vote(ctx, out.augmented, cfg.proposal, "proposal");
  if (cfg.proposal.targetness != proposal::TargetnessMode::NoBranch) {
    out.seed_logits = proposal::seed_targetness(ctx, out.augmented, cfg.proposal, "proposal");
    out.seed_scores = g.sigmoid(out.seed_logits);
  }

  proposal::ClusterPlan plan;
  if (pinned && pinned->has_cluster) {
    plan = pinned->cluster;
  } else {
    plan = proposal::cluster(g.value(out.centers.positions), cfg.proposal.cluster_count,
                             cfg.proposal.cluster_radius, cfg.proposal.cluster_group_size,
                             rng.fork(3));
  }
  if (plan_out) {
    plan_out->cluster = plan;
    plan_out->has_cluster = true;
  }
  out.proposals = proposal::propose(ctx, out.centers, out.seed_scores, plan, cfg.proposal,
                                    "proposal");
  return out;
}

diffcore::Var training_loss(Binding& ctx, const ForwardOutputs& out, const pcops::Box3D& gt_box,
                            const PipelineConfig& cfg, LossBreakdown* breakdown,
                            const losses::ProposalTargets* pinned_targets,
                            losses::ProposalTargets* targets_out) {
  diffcore::Graph& g = ctx.graph();

  const losses::FrameTargets frame_targets =
      losses::make_frame_targets(gt_box, out.search_seeds.positions);
  Var reg = losses::reg_loss(g, out.centers.offsets, frame_targets, cfg.reg_l2);

  Var cla;  // stays invalid when the branch is disabled
  if (out.seed_logits.valid())
    cla = losses::seed_cls_loss(g, out.seed_logits, frame_targets.seed_mask);

  losses::ProposalTargets prop_targets;
  if (pinned_targets) {
    prop_targets = *pinned_targets;
  } else {
    // detached centroid positions as regression anchors
    const diffcore::Array& center_values = g.value(out.centers.positions);
    const int k = out.proposals.count;
    diffcore::Array centroid_positions(diffcore::Shape{k, 3});
    for (int i = 0; i < k; ++i)
      for (int a = 0; a < 3; ++a)
        centroid_positions.at(i, a) = center_values.at(out.proposals.centroid_indices[i], a);
    prop_targets = losses::make_proposal_targets(
        gt_box, g.value(out.proposals.centers), centroid_positions, cfg.proposal.sincos_heading,
        cfg.pos_distance, cfg.neg_distance);
  }
  if (targets_out) *targets_out = prop_targets;

  Var prop = losses::proposal_cls_loss(g, out.proposals.logits, prop_targets);
  Var box = losses::box_loss(g, out.proposals.box_params, prop_targets);
  Var total = losses::total_loss(g, reg, cla, prop, box, cfg.weights);

  if (breakdown) {
    breakdown->total = g.value(total).values[0];
    breakdown->reg = g.value(reg).values[0];
    breakdown->cla = cla.valid() ? g.value(cla).values[0] : 0.0;
    breakdown->prop = g.value(prop).values[0];
    breakdown->box = g.value(box).values[0];
    breakdown->on_target_seeds = frame_targets.on_target_seeds;
    breakdown->positive_proposals = 0;
    for (double v : prop_targets.positive)
      if (v != 0.0) ++breakdown->positive_proposals;
  }
  return total;
}

}  // namespace p2b::tracker
