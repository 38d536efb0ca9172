#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "p2b/backbone.hpp"
#include "testutil.hpp"

using namespace p2b;
using namespace p2b::backbone;
using diffcore::Binding;
using diffcore::Graph;
using diffcore::ParamStore;
using diffcore::Var;

namespace {

pcops::PointCloud random_cloud(int n, Rng& rng, double extent = 2.0) {
  pcops::PointCloud c;
  for (int i = 0; i < n; ++i)
    c.points.push_back({rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                        rng.uniform(-extent, extent)});
  return c;
}

}  // namespace

TEST_CASE("paper-size encodings") {
  Rng rng(1);
  BackboneConfig cfg = BackboneConfig::paper();
  ParamStore store;
  init_params(store, cfg, "backbone", rng);

  SUBCASE("512-point template gives 64 seeds of 256 features") {
    pcops::PointCloud cloud = random_cloud(512, rng);
    Graph g;
    Binding ctx(g, store, false);
    SeedSet seeds = encode(ctx, cloud, cfg, "backbone", rng.fork(1));
    CHECK(seeds.positions.size() == 64);
    CHECK(g.value(seeds.features).rows() == 64);
    CHECK(g.value(seeds.features).cols() == 256);
  }
  SUBCASE("1024-point search area gives 128 seeds") {
    pcops::PointCloud cloud = random_cloud(1024, rng);
    Graph g;
    Binding ctx(g, store, false);
    SeedSet seeds = encode(ctx, cloud, cfg, "backbone", rng.fork(2));
    CHECK(seeds.positions.size() == 128);
    CHECK(g.value(seeds.features).cols() == 256);
  }
  SUBCASE("tiny input rejected") {
    pcops::PointCloud cloud = random_cloud(5, rng);
    Graph g;
    Binding ctx(g, store, false);
    CHECK_THROWS_AS(encode(ctx, cloud, cfg, "backbone", rng.fork(3)), ContractError);
  }
}

TEST_CASE("encode is deterministic under a fixed seed") {
  Rng rng(2);
  BackboneConfig cfg = BackboneConfig::scaled(16, 8);
  ParamStore store;
  init_params(store, cfg, "backbone", rng);
  pcops::PointCloud cloud = random_cloud(64, rng);

  auto run = [&] {
    Graph g;
    Binding ctx(g, store, false);
    SeedSet seeds = encode(ctx, cloud, cfg, "backbone", Rng(77));
    return g.value(seeds.features).values;
  };
  CHECK(run() == run());
}

TEST_CASE("fixed centroid draws make features invariant to input permutation") {
  Rng rng(3);
  BackboneConfig cfg = BackboneConfig::scaled(16, 64);  // groups never truncate
  for (auto& layer : cfg.layers) layer.group_size = 64;
  ParamStore store;
  init_params(store, cfg, "backbone", rng);
  pcops::PointCloud cloud = random_cloud(32, rng);

  {  // warm the running statistics so inference uses them
    Graph g0;
    Binding warm(g0, store, true);
    encode(warm, cloud, cfg, "backbone", Rng(5));
  }

  Graph g1;
  Binding ctx1(g1, store, false);
  SaPlan plan;
  SeedSet base = encode(ctx1, cloud, cfg, "backbone", Rng(5), nullptr, &plan);

  // reverse the input order and remap the pinned draws through it
  const int n = static_cast<int>(cloud.size());
  pcops::PointCloud reversed;
  reversed.points.assign(cloud.points.rbegin(), cloud.points.rend());
  SaPlan remapped = plan;
  for (int& idx : remapped.centroid_indices[0]) idx = n - 1 - idx;
  // deeper layers index centroid lists, which the plan pins identically

  Graph g2;
  Binding ctx2(g2, store, false);
  SeedSet perm = encode(ctx2, reversed, cfg, "backbone", Rng(5), &remapped);

  const auto& a = g1.value(base.features);
  const auto& b = g2.value(perm.features);
  REQUIRE(a.shape == b.shape);
  for (std::size_t k = 0; k < a.numel(); ++k)
    CHECK(a.values[k] == doctest::Approx(b.values[k]).epsilon(1e-9));
}

TEST_CASE("single centroid with unbounded radius equals a global pool") {
  Rng rng(4);
  SaLayer layer{1e9, 16, {8, 8}};
  diffcore::Mlp mlp("sa", 3, diffcore::MlpSpec::hidden_stack(layer.mlp));
  ParamStore store;
  mlp.init(store, rng);

  pcops::PointCloud cloud = random_cloud(16, rng);
  std::vector<int> pinned{3};

  Graph g;
  Binding ctx(g, store, false);
  Rng sample_rng(1);
  SeedSet out = set_abstraction(ctx, cloud.points, Var{}, layer, 1, "sa", sample_rng, &pinned);

  // oracle: per-point MLP on relative coordinates, column max over all rows
  Graph g2;
  Binding ctx2(g2, store, false);
  diffcore::Array rel(diffcore::Shape{16, 3});
  for (int i = 0; i < 16; ++i)
    for (int a = 0; a < 3; ++a) rel.at(i, a) = cloud.points[i][a] - cloud.points[3][a];
  Var pooled = g2.maxpool_set(mlp.forward(ctx2, g2.constant(rel)));

  const auto& got = g.value(out.features);
  const auto& want = g2.value(pooled);
  REQUIRE(got.numel() == want.numel());
  for (std::size_t k = 0; k < got.numel(); ++k)
    CHECK(got.values[k] == doctest::Approx(want.values[k]).epsilon(1e-9));
}

TEST_CASE("finite outputs inside a 100 m cube") {
  Rng rng(6);
  BackboneConfig cfg = BackboneConfig::scaled(16, 8);
  ParamStore store;
  init_params(store, cfg, "backbone", rng);
  pcops::PointCloud cloud = random_cloud(64, rng, 50.0);
  Graph g;
  Binding ctx(g, store, true);
  SeedSet seeds = encode(ctx, cloud, cfg, "backbone", rng.fork(1));
  CHECK(g.value(seeds.features).all_finite());
}

TEST_CASE("backbone gradients pass the finite-difference check") {
  Rng rng(7);
  BackboneConfig cfg;
  cfg.layers = {{0.8, 4, {6, 6}}, {1.2, 4, {6, 8}}};
  ParamStore store;
  init_params(store, cfg, "backbone", rng);
  pcops::PointCloud cloud = random_cloud(12, rng, 0.6);

  SaPlan plan;
  diffcore::GradMap grads;
  {
    Graph g;
    Binding ctx(g, store, true);
    SeedSet seeds = encode(ctx, cloud, cfg, "backbone", Rng(9), nullptr, &plan);
    Var loss = g.sum(seeds.features);
    g.backward(loss);
    grads = ctx.collect_grads();
  }
  auto eval = [&](ParamStore& s) {
    Graph g;
    Binding ctx(g, s, true);
    SeedSet seeds = encode(ctx, cloud, cfg, "backbone", Rng(9), &plan);
    return g.value(g.sum(seeds.features)).values[0];
  };
  auto res = testutil::finite_diff_check(store, eval, grads);
  INFO(res.worst);
  CHECK(res.max_rel < 1e-4);
}
