#include "p2b/backbone.hpp"

namespace p2b::backbone {

using diffcore::Array;
using diffcore::Binding;
using diffcore::Mlp;
using diffcore::MlpSpec;
using diffcore::Shape;
using diffcore::Var;

BackboneConfig BackboneConfig::paper() {
  BackboneConfig cfg;
  cfg.layers = {
      {0.3, 32, {64, 64, 128}},
      {0.5, 32, {128, 128, 256}},
      {0.7, 32, {256, 256, 256}},
  };
  return cfg;
}

BackboneConfig BackboneConfig::scaled(int d1, int group_size) {
  const int h = std::max(4, d1 / 2);
  BackboneConfig cfg;
  cfg.layers = {
      {0.3, group_size, {h / 2, h / 2, h}},
      {0.5, group_size, {h, h, d1}},
      {0.7, group_size, {d1, d1, d1}},
  };
  return cfg;
}

namespace {

std::string layer_prefix(const std::string& prefix, int layer) {
  return prefix + ".sa" + std::to_string(layer);
}

int layer_in_dim(const BackboneConfig& cfg, int layer) {
  return 3 + (layer == 0 ? 0 : cfg.layers[layer - 1].mlp.back());
}

}  // namespace

void init_params(diffcore::ParamStore& store, const BackboneConfig& cfg,
                 const std::string& prefix, Rng& rng) {
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    Mlp mlp(layer_prefix(prefix, static_cast<int>(i)), layer_in_dim(cfg, static_cast<int>(i)),
            MlpSpec::hidden_stack(cfg.layers[i].mlp));
    mlp.init(store, rng);
  }
}

SeedSet set_abstraction(Binding& ctx, const std::vector<pcops::Vec3>& positions, Var features,
                        const SaLayer& layer, int output_count, const std::string& prefix,
                        Rng& rng, const std::vector<int>* pinned_centroids,
                        std::vector<int>* centroids_out) {
  const int n = static_cast<int>(positions.size());
  if (output_count > n)
    throw ContractError("set_abstraction: cannot sample " + std::to_string(output_count) +
                        " centroids from " + std::to_string(n) + " points");
  std::vector<int> centroids = pinned_centroids
                                   ? *pinned_centroids
                                   : pcops::sample_without_replacement(n, output_count, rng);
  if (centroids_out) *centroids_out = centroids;

  std::vector<pcops::Vec3> centers(centroids.size());
  for (std::size_t i = 0; i < centroids.size(); ++i) centers[i] = positions[centroids[i]];
  const auto groups =
      pcops::ball_query(centers, positions, layer.radius, layer.group_size, centroids);

  const int k = layer.group_size;
  const std::size_t rows = centers.size() * static_cast<std::size_t>(k);
  Array rel(Shape{static_cast<int>(rows), 3});
  std::vector<int> flat(rows);
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (int j = 0; j < k; ++j) {
      const std::size_t r = c * k + j;
      const int idx = groups.indices[r];
      flat[r] = idx;
      const pcops::Vec3 d = positions[idx] - centers[c];
      rel.at(static_cast<int>(r), 0) = d.x;
      rel.at(static_cast<int>(r), 1) = d.y;
      rel.at(static_cast<int>(r), 2) = d.z;
    }

  diffcore::Graph& g = ctx.graph();
  Var grouped = g.constant(std::move(rel));
  if (features.valid())
    grouped = g.concat_cols({grouped, g.gather_rows(features, flat)});

  Mlp mlp(prefix, 3 + (features.valid() ? g.value(features).cols() : 0),
          MlpSpec::hidden_stack(layer.mlp));
  Var per_point = mlp.forward(ctx, grouped);
  Var pooled = g.maxpool_groups(per_point, k);
  return SeedSet{std::move(centers), pooled};
}

SeedSet encode(Binding& ctx, const pcops::PointCloud& cloud, const BackboneConfig& cfg,
               const std::string& prefix, Rng rng, const SaPlan* pinned, SaPlan* plan_out) {
  const int n = static_cast<int>(cloud.size());
  if (n < (1 << cfg.layers.size()))
    throw ContractError("encode: input of " + std::to_string(n) +
                        " points is too small for " + std::to_string(cfg.layers.size()) +
                        " halvings");
  SeedSet seeds{cloud.points, diffcore::Var{}};
  if (plan_out) plan_out->centroid_indices.clear();
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const int out_count = static_cast<int>(seeds.positions.size()) / 2;
    Rng layer_rng = rng.fork(i);
    std::vector<int> drawn;
    seeds = set_abstraction(ctx, seeds.positions, seeds.features, cfg.layers[i], out_count,
                            layer_prefix(prefix, static_cast<int>(i)), layer_rng,
                            pinned ? &pinned->centroid_indices[i] : nullptr,
                            plan_out ? &drawn : nullptr);
    if (plan_out) plan_out->centroid_indices.push_back(std::move(drawn));
  }
  return seeds;
}

}  // namespace p2b::backbone
