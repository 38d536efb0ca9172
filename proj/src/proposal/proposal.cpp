#include "p2b/proposal.hpp"

#include <cmath>

namespace p2b::proposal {

using diffcore::Array;
using diffcore::Binding;
using diffcore::Mlp;
using diffcore::MlpSpec;
using diffcore::Shape;
using diffcore::Var;

const char* to_string(TargetnessMode m) {
  switch (m) {
    case TargetnessMode::Full: return "full";
    case TargetnessMode::NoConcat: return "no_concat";
    case TargetnessMode::NoBranch: return "no_branch";
  }
  return "full";
}

TargetnessMode targetness_from_string(const std::string& s) {
  if (s == "full") return TargetnessMode::Full;
  if (s == "no_concat") return TargetnessMode::NoConcat;
  if (s == "no_branch") return TargetnessMode::NoBranch;
  throw UsageError("unknown targetness mode: " + s);
}

namespace {

int descriptor_dim(const ProposalConfig& cfg, int d2) {
  return (cfg.targetness == TargetnessMode::Full ? 1 : 0) + 3 + d2;
}

}  // namespace

void init_params(diffcore::ParamStore& store, const ProposalConfig& cfg, int d2,
                 const std::string& prefix, Rng& rng) {
  Mlp vote_mlp(prefix + ".vote", d2, MlpSpec::head(cfg.vote_hidden, 3 + d2));
  vote_mlp.init(store, rng);
  if (cfg.targetness != TargetnessMode::NoBranch) {
    Mlp tgt(prefix + ".targetness", d2, MlpSpec::head(cfg.targetness_hidden, 1));
    tgt.init(store, rng);
  }
  Mlp theta_pre(prefix + ".theta.pre", descriptor_dim(cfg, d2),
                MlpSpec::hidden_stack(cfg.theta_pre));
  theta_pre.init(store, rng);
  Mlp theta_post(prefix + ".theta.post", cfg.theta_pre.back(),
                 MlpSpec::head(cfg.theta_post_hidden, cfg.theta_out()));
  theta_post.init(store, rng);
}

PotentialCenters vote(Binding& ctx, const tsfa::AugmentedSeedSet& aug, const ProposalConfig& cfg,
                      const std::string& prefix) {
  diffcore::Graph& g = ctx.graph();
  const int m2 = static_cast<int>(aug.positions.size());
  const int d2 = g.value(aug.features).cols();

  Mlp vote_mlp(prefix + ".vote", d2, MlpSpec::head(cfg.vote_hidden, 3 + d2));
  Var out = vote_mlp.forward(ctx, aug.features);
  Var dx = g.slice_cols(out, 0, 3);
  Var df = g.slice_cols(out, 3, 3 + d2);

  Array xyz(Shape{m2, 3});
  for (int j = 0; j < m2; ++j) {
    xyz.at(j, 0) = aug.positions[j].x;
    xyz.at(j, 1) = aug.positions[j].y;
    xyz.at(j, 2) = aug.positions[j].z;
  }
  PotentialCenters centers;
  centers.count = m2;
  centers.offsets = dx;
  centers.positions = g.add(g.constant(std::move(xyz)), dx);
  centers.features = g.add(aug.features, df);
  return centers;
}

Var seed_targetness(Binding& ctx, const tsfa::AugmentedSeedSet& aug, const ProposalConfig& cfg,
                    const std::string& prefix) {
  diffcore::Graph& g = ctx.graph();
  const int d2 = g.value(aug.features).cols();
  Mlp tgt(prefix + ".targetness", d2, MlpSpec::head(cfg.targetness_hidden, 1));
  return tgt.forward(ctx, aug.features);
}

ClusterPlan cluster(const Array& center_positions, int k, double radius, int group_size,
                    Rng rng) {
  const int m2 = center_positions.rows();
  if (k > m2)
    throw ContractError("cluster: K=" + std::to_string(k) + " exceeds the " +
                        std::to_string(m2) + " potential centers");
  std::vector<pcops::Vec3> pts(m2);
  for (int j = 0; j < m2; ++j)
    pts[j] = {center_positions.at(j, 0), center_positions.at(j, 1), center_positions.at(j, 2)};

  ClusterPlan plan;
  plan.group_size = group_size;
  plan.centroid_indices = pcops::sample_without_replacement(m2, k, rng);
  std::vector<pcops::Vec3> centroids(k);
  for (int c = 0; c < k; ++c) centroids[c] = pts[plan.centroid_indices[c]];
  const auto groups =
      pcops::ball_query(centroids, pts, radius, group_size, plan.centroid_indices);
  plan.member_indices = groups.indices;
  plan.degenerate = groups.degenerate;
  return plan;
}

Proposals propose(Binding& ctx, const PotentialCenters& centers, Var scores,
                  const ClusterPlan& plan, const ProposalConfig& cfg,
                  const std::string& prefix) {
  diffcore::Graph& g = ctx.graph();
  const int k = static_cast<int>(plan.centroid_indices.size());
  if (k == 0) throw ContractError("propose: empty cluster plan");
  const int gs = plan.group_size;
  const int d2 = g.value(centers.features).cols();

  std::vector<int> centroid_expanded(static_cast<std::size_t>(k) * gs);
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < gs; ++j)
      centroid_expanded[static_cast<std::size_t>(c) * gs + j] = plan.centroid_indices[c];

  Var member_pos = g.gather_rows(centers.positions, plan.member_indices);
  Var centroid_pos = g.gather_rows(centers.positions, centroid_expanded);
  Var rel = g.sub(member_pos, centroid_pos);
  Var feats = g.gather_rows(centers.features, plan.member_indices);

  std::vector<Var> parts;
  if (cfg.targetness == TargetnessMode::Full) {
    if (!scores.valid()) throw ContractError("propose: targetness scores missing");
    parts.push_back(g.gather_rows(scores, plan.member_indices));
  }
  parts.push_back(rel);
  parts.push_back(feats);

  Mlp theta_pre(prefix + ".theta.pre", descriptor_dim(cfg, d2),
                MlpSpec::hidden_stack(cfg.theta_pre));
  Var pooled = g.maxpool_groups(theta_pre.forward(ctx, g.concat_cols(parts)), gs);
  Mlp theta_post(prefix + ".theta.post", cfg.theta_pre.back(),
                 MlpSpec::head(cfg.theta_post_hidden, cfg.theta_out()));
  Var head = theta_post.forward(ctx, pooled);

  Proposals props;
  props.count = k;
  props.centroid_indices = plan.centroid_indices;
  props.box_params = g.slice_cols(head, 0, cfg.box_params());
  props.logits = g.slice_cols(head, cfg.box_params(), cfg.theta_out());
  props.scores = g.sigmoid(props.logits);
  Var offsets = g.slice_cols(head, 0, 3);
  props.centers = g.add(g.gather_rows(centers.positions, plan.centroid_indices), offsets);
  return props;
}

ProposalValues materialize(const diffcore::Graph& g, const Proposals& props,
                           const pcops::Box3D& template_box, bool sincos_heading) {
  ProposalValues out;
  const Array& centers = g.value(props.centers);
  const Array& params = g.value(props.box_params);
  const Array& scores = g.value(props.scores);
  for (int i = 0; i < props.count; ++i) {
    out.scores.push_back(scores.values[i]);
    double heading;
    if (sincos_heading)
      heading = std::atan2(params.at(i, 3), params.at(i, 4));
    else
      heading = wrap_angle(params.at(i, 3));
    pcops::Box3D box = template_box;
    box.center = {centers.at(i, 0), centers.at(i, 1), centers.at(i, 2)};
    box.heading = heading;
    out.boxes.push_back(box);
  }
  return out;
}

int select_best(const std::vector<double>& scores) {
  if (scores.empty()) throw ContractError("select_best: no proposals");
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

}  // namespace p2b::proposal
