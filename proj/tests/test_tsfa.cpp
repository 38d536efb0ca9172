#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <numeric>

#include "doctest.h"
#include "p2b/tsfa.hpp"
#include "testutil.hpp"

using namespace p2b;
using namespace p2b::tsfa;
using diffcore::Array;
using diffcore::Binding;
using diffcore::Graph;
using diffcore::ParamStore;
using diffcore::Shape;
using diffcore::Var;
using diffcore::make_matrix;

namespace {

backbone::SeedSet make_seeds(Graph& g, const Array& features, Rng& rng) {
  backbone::SeedSet s;
  for (int i = 0; i < features.rows(); ++i)
    s.positions.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  s.features = g.input(features);
  return s;
}

}  // namespace

TEST_CASE("cosine similarity values") {
  SUBCASE("self similarity") {
    auto sim = similarity_map(make_matrix(1, 2, {1, 0}), make_matrix(1, 2, {1, 0}));
    CHECK(sim.values.values[0] == doctest::Approx(1.0));
  }
  SUBCASE("orthogonal vectors") {
    auto sim = similarity_map(make_matrix(1, 2, {1, 0}), make_matrix(1, 2, {0, 1}));
    CHECK(sim.values.values[0] == doctest::Approx(0.0));
  }
  SUBCASE("hand-evaluated pair") {
    auto sim = similarity_map(make_matrix(1, 3, {1, 2, 2}), make_matrix(1, 3, {2, 1, 2}));
    CHECK(sim.values.values[0] == doctest::Approx(8.0 / 9.0));
  }
  SUBCASE("zero-norm row flagged and substituted with 0") {
    auto sim = similarity_map(make_matrix(2, 2, {0, 0, 1, 0}), make_matrix(1, 2, {1, 0}));
    CHECK(sim.zero_norm_rows == 1);
    CHECK(sim.values.at(0, 0) == 0.0);
    CHECK(sim.values.at(0, 1) == doctest::Approx(1.0));
  }
  SUBCASE("bounded by 1 + 1e-9 on random inputs") {
    Rng rng(5);
    auto q = testutil::random_array({6, 8}, rng);
    auto r = testutil::random_array({9, 8}, rng);
    auto sim = similarity_map(q, r);
    for (double v : sim.values.values) CHECK(std::fabs(v) <= 1.0 + 1e-9);
  }
  SUBCASE("graph route matches the plain route") {
    Rng rng(6);
    auto q = testutil::random_array({4, 5}, rng);
    auto r = testutil::random_array({7, 5}, rng);
    Graph g;
    Var sim = similarity_var(g, g.constant(q), g.constant(r));
    auto plain = similarity_map(q, r);
    REQUIRE(g.value(sim).shape == plain.values.shape);
    for (std::size_t k = 0; k < plain.values.numel(); ++k)
      CHECK(g.value(sim).values[k] == doctest::Approx(plain.values.values[k]).epsilon(1e-12));
  }
}

namespace {

TsfaConfig small_cfg(Variant v = Variant::Default) {
  TsfaConfig cfg;
  cfg.variant = v;
  cfg.out_dim = 8;
  cfg.pre_widths = {8, 8, 8};
  cfg.post_hidden = {8, 8};
  return cfg;
}

std::vector<double> run_augment(ParamStore& store, const TsfaConfig& cfg, const Array& q_feat,
                                const Array& r_feat,
                                const std::vector<pcops::Vec3>& q_pos,
                                const std::vector<pcops::Vec3>& r_pos, bool training = true) {
  Graph g;
  Binding ctx(g, store, training);
  backbone::SeedSet q{q_pos, g.constant(q_feat)};
  backbone::SeedSet r{r_pos, g.constant(r_feat)};
  Var sim = similarity_var(g, q.features, r.features);
  AugmentedSeedSet aug = augment(ctx, r, q, sim, cfg, "tsfa");
  return g.value(aug.features).values;
}

}  // namespace

TEST_CASE("augment is invariant to template permutation") {
  Rng rng(11);
  const int d1 = 6, m1 = 5, m2 = 4;
  TsfaConfig cfg = small_cfg();
  ParamStore store;
  init_params(store, cfg, d1, "tsfa", rng);

  for (int trial = 0; trial < 5; ++trial) {
    Rng r = rng.fork(trial);
    Array qf = testutil::random_array({m1, d1}, r);
    Array rf = testutil::random_array({m2, d1}, r);
    std::vector<pcops::Vec3> qp, rp;
    for (int i = 0; i < m1; ++i) qp.push_back({r.uniform(-1, 1), r.uniform(-1, 1), 0});
    for (int j = 0; j < m2; ++j) rp.push_back({r.uniform(-1, 1), r.uniform(-1, 1), 0});
    auto base = run_augment(store, cfg, qf, rf, qp, rp);

    for (int p = 0; p < 20; ++p) {
      Rng pr = r.fork(100 + p);
      std::vector<int> order(m1);
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = m1; i > 1; --i) std::swap(order[i - 1], order[pr.uniform_index(i)]);
      Array qf2(Shape{m1, d1});
      std::vector<pcops::Vec3> qp2(m1);
      for (int i = 0; i < m1; ++i) {
        qp2[i] = qp[order[i]];
        for (int k = 0; k < d1; ++k) qf2.at(i, k) = qf.at(order[i], k);
      }
      auto permuted = run_augment(store, cfg, qf2, rf, qp2, rp);
      REQUIRE(permuted.size() == base.size());
      for (std::size_t k = 0; k < base.size(); ++k)
        CHECK(std::fabs(base[k] - permuted[k]) < 1e-9);
    }
  }
}

TEST_CASE("singleton template pool is an identity") {
  Rng rng(13);
  const int d1 = 4, m2 = 3;
  TsfaConfig cfg = small_cfg();
  ParamStore store;
  init_params(store, cfg, d1, "tsfa", rng);

  Array qf = testutil::random_array({1, d1}, rng);
  Array rf = testutil::random_array({m2, d1}, rng);
  std::vector<pcops::Vec3> qp{{0.3, -0.2, 0.1}};
  std::vector<pcops::Vec3> rp{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  auto got = run_augment(store, cfg, qf, rf, qp, rp);

  // oracle: build the M2 x (1+3+d1) rows directly and run both stacks
  auto plain = similarity_map(qf, rf);
  Graph g;
  Binding ctx(g, store, true);
  Array rows(Shape{m2, 1 + 3 + d1});
  for (int j = 0; j < m2; ++j) {
    rows.at(j, 0) = plain.values.at(j, 0);
    for (int a = 0; a < 3; ++a) rows.at(j, 1 + a) = qp[0][a];
    for (int k = 0; k < d1; ++k) rows.at(j, 4 + k) = qf.at(0, k);
  }
  diffcore::Mlp pre("tsfa.pre", pre_in_dim(cfg.variant, d1),
                    diffcore::MlpSpec::hidden_stack(cfg.pre_widths));
  diffcore::Mlp post("tsfa.post", post_in_dim(cfg.variant, d1, cfg.pre_widths.back()),
                     diffcore::MlpSpec::head(cfg.post_hidden, cfg.out_dim));
  Var want = post.forward(ctx, pre.forward(ctx, g.constant(rows)));
  const auto& w = g.value(want).values;
  REQUIRE(w.size() == got.size());
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(got[k] == doctest::Approx(w[k]).epsilon(1e-9));
}

TEST_CASE("similarity and template-feature columns are both live") {
  Rng rng(17);
  const int d1 = 6, m1 = 4, m2 = 3;
  ParamStore store;
  TsfaConfig def = small_cfg(Variant::Default);
  init_params(store, def, d1, "tsfa", rng);

  Array qf = testutil::random_array({m1, d1}, rng);
  Array rf = testutil::random_array({m2, d1}, rng);
  std::vector<pcops::Vec3> qp, rp;
  for (int i = 0; i < m1; ++i) qp.push_back({rng.uniform(-1, 1), 0, 0});
  for (int j = 0; j < m2; ++j) rp.push_back({rng.uniform(-1, 1), 0, 0});
  auto base = run_augment(store, def, qf, rf, qp, rp);

  // scaling template features leaves the cosine map fixed, so any change
  // must flow through the f_q columns
  Array qf2 = qf;
  for (double& v : qf2.values) v *= 2.0;
  auto sim_scaled = similarity_map(qf2, rf).values.values;
  auto sim_base = similarity_map(qf, rf).values.values;
  for (std::size_t k = 0; k < sim_base.size(); ++k)
    CHECK(sim_scaled[k] == doctest::Approx(sim_base[k]).epsilon(1e-12));
  auto scaled = run_augment(store, def, qf2, rf, qp, rp);
  double diff_fq = 0.0;
  for (std::size_t k = 0; k < base.size(); ++k)
    diff_fq = std::max(diff_fq, std::fabs(base[k] - scaled[k]));
  CHECK(diff_fq > 1e-6);

  // rotating a search feature changes the default rows only via Sim
  Array rf2 = rf;
  rf2.at(1, 0) = -rf.at(1, 1);
  rf2.at(1, 1) = rf.at(1, 0);
  auto rotated = run_augment(store, def, qf, rf2, qp, rp);
  double diff_sim = 0.0;
  for (std::size_t k = 0; k < base.size(); ++k)
    diff_sim = std::max(diff_sim, std::fabs(base[k] - rotated[k]));
  CHECK(diff_sim > 1e-9);
}

TEST_CASE("variant input widths") {
  CHECK(pre_in_dim(Variant::Default, 256) == 260);
  CHECK(pre_in_dim(Variant::NoTemplateFeatures, 256) == 4);
  CHECK(pre_in_dim(Variant::NoSimilarity, 256) == 259);
  CHECK(pre_in_dim(Variant::SearchFeaturesA, 256) == 516);
  CHECK(post_in_dim(Variant::SearchFeaturesB, 256, 256) == 512);
  CHECK(post_in_dim(Variant::Default, 256, 256) == 256);
}

TEST_CASE("every variant runs and differs in output") {
  Rng rng(19);
  const int d1 = 6, m1 = 4, m2 = 3;
  Array qf = testutil::random_array({m1, d1}, rng);
  Array rf = testutil::random_array({m2, d1}, rng);
  std::vector<pcops::Vec3> qp, rp;
  for (int i = 0; i < m1; ++i) qp.push_back({rng.uniform(-1, 1), 0, 0});
  for (int j = 0; j < m2; ++j) rp.push_back({rng.uniform(-1, 1), 0, 0});

  const Variant variants[] = {Variant::Default, Variant::NoTemplateFeatures,
                              Variant::NoSimilarity, Variant::SearchFeaturesA,
                              Variant::SearchFeaturesB};
  std::vector<std::vector<double>> outs;
  for (Variant v : variants) {
    TsfaConfig cfg = small_cfg(v);
    ParamStore store;
    Rng init_rng(42);  // same draw sequence for comparable stacks
    init_params(store, cfg, d1, "tsfa", init_rng);
    outs.push_back(run_augment(store, cfg, qf, rf, qp, rp));
    CHECK(outs.back().size() == static_cast<std::size_t>(m2 * cfg.out_dim));
    for (double x : outs.back()) CHECK(std::isfinite(x));
  }
  // ablation probe: the default and the no-similarity routes disagree
  double diff = 0.0;
  for (std::size_t k = 0; k < outs[0].size(); ++k)
    diff = std::max(diff, std::fabs(outs[0][k] - outs[2][k]));
  CHECK(diff > 1e-9);
}

TEST_CASE("row locality in inference mode") {
  Rng rng(23);
  const int d1 = 6, m1 = 4, m2 = 5;
  TsfaConfig cfg = small_cfg();
  ParamStore store;
  init_params(store, cfg, d1, "tsfa", rng);

  Array qf = testutil::random_array({m1, d1}, rng);
  Array rf = testutil::random_array({m2, d1}, rng);
  std::vector<pcops::Vec3> qp, rp;
  for (int i = 0; i < m1; ++i) qp.push_back({rng.uniform(-1, 1), 0, 0});
  for (int j = 0; j < m2; ++j) rp.push_back({rng.uniform(-1, 1), 0, 0});

  run_augment(store, cfg, qf, rf, qp, rp, true);  // warm running stats
  auto base = run_augment(store, cfg, qf, rf, qp, rp, false);

  Array rf2 = rf;
  for (int k = 0; k < d1; ++k) rf2.at(2, k) += 0.5;  // change only seed 2
  auto changed = run_augment(store, cfg, qf, rf2, qp, rp, false);

  for (int j = 0; j < m2; ++j) {
    double diff = 0.0;
    for (int k = 0; k < cfg.out_dim; ++k)
      diff = std::max(diff, std::fabs(base[j * cfg.out_dim + k] - changed[j * cfg.out_dim + k]));
    if (j == 2)
      CHECK(diff > 1e-9);
    else
      CHECK(diff == doctest::Approx(0.0));
  }
}

TEST_CASE("augment gradients pass the finite-difference check") {
  Rng rng(29);
  const int d1 = 5, m1 = 3, m2 = 3;
  TsfaConfig cfg = small_cfg();
  cfg.pre_widths = {6, 6};
  cfg.post_hidden = {6};
  cfg.out_dim = 4;
  ParamStore store;
  init_params(store, cfg, d1, "tsfa", rng);

  Array qf = testutil::random_array({m1, d1}, rng);
  Array rf = testutil::random_array({m2, d1}, rng);
  std::vector<pcops::Vec3> qp, rp;
  for (int i = 0; i < m1; ++i) qp.push_back({rng.uniform(-1, 1), 0, 0});
  for (int j = 0; j < m2; ++j) rp.push_back({rng.uniform(-1, 1), 0, 0});

  diffcore::GradMap grads;
  {
    Graph g;
    Binding ctx(g, store, true);
    backbone::SeedSet q{qp, g.constant(qf)};
    backbone::SeedSet r{rp, g.constant(rf)};
    AugmentedSeedSet aug =
        augment(ctx, r, q, similarity_var(g, q.features, r.features), cfg, "tsfa");
    g.backward(g.sum(aug.features));
    grads = ctx.collect_grads();
  }
  auto eval = [&](ParamStore& s) {
    Graph g;
    Binding ctx(g, s, true);
    backbone::SeedSet q{qp, g.constant(qf)};
    backbone::SeedSet r{rp, g.constant(rf)};
    AugmentedSeedSet aug =
        augment(ctx, r, q, similarity_var(g, q.features, r.features), cfg, "tsfa");
    return g.value(g.sum(aug.features)).values[0];
  };
  auto res = testutil::finite_diff_check(store, eval, grads);
  INFO(res.worst);
  CHECK(res.max_rel < 1e-4);
}
