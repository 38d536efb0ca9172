#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "p2b/tracker/ablation.hpp"
#include "p2b/tracker/track.hpp"
#include "p2b/tracker/train.hpp"
#include "testutil.hpp"

using namespace p2b;
using namespace p2b::tracker;

namespace {

dataio::SyntheticSpec micro_spec() {
  dataio::SyntheticSpec spec;
  spec.frames = 4;
  spec.length = 2.0;
  spec.width = 1.2;
  spec.height = 1.0;
  spec.points_on_target = 24;
  spec.clutter_points = 16;
  spec.step_translation = 0.15;
  return spec;
}

TrainConfig micro_train(int epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 4;
  t.lr = 0.002;
  t.seed = 5;
  return t;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  CHECK(lr_at_epoch(cfg, 1) == doctest::Approx(0.001));
  CHECK(lr_at_epoch(cfg, 10) == doctest::Approx(0.001));
  CHECK(lr_at_epoch(cfg, 11) == doctest::Approx(0.0002));
  CHECK(lr_at_epoch(cfg, 40) == doctest::Approx(0.0002));
}

TEST_CASE("end-to-end gradients match finite differences on a tiny pipeline") {
  PipelineConfig cfg = PipelineConfig::micro();
  cfg.pos_distance = 1.0;  // tiny scene: keep both proposal labels present
  cfg.neg_distance = 1.5;

  dataio::SyntheticSpec spec = micro_spec();
  spec.points_on_target = 12;
  spec.clutter_points = 6;
  dataio::Tracklet tracklet = dataio::generate_synthetic_tracklet(spec, 3);
  auto sample = dataio::augment_training_sample(tracklet, 1, cfg.sample, Rng(11));
  REQUIRE(sample.has_value());

  PipelineParams params = PipelineParams::init(cfg, 17);
  ForwardPlan plan;
  losses::ProposalTargets targets;
  diffcore::GradMap grads;
  LossBreakdown bd;
  {
    diffcore::Graph g;
    diffcore::Binding ctx(g, params.store, true);
    ForwardOutputs out =
        forward(ctx, sample->template_cloud, sample->search_cloud, cfg, Rng(23), nullptr, &plan);
    diffcore::Var loss =
        training_loss(ctx, out, sample->gt_box, cfg, &bd, nullptr, &targets);
    g.backward(loss);
    grads = ctx.collect_grads();
  }
  CHECK(bd.on_target_seeds > 0);  // the regression and classification paths are hot

  auto eval = [&](diffcore::ParamStore& s) {
    diffcore::Graph g;
    diffcore::Binding ctx(g, s, true);
    ForwardOutputs out =
        forward(ctx, sample->template_cloud, sample->search_cloud, cfg, Rng(23), &plan);
    return g.value(training_loss(ctx, out, sample->gt_box, cfg, nullptr, &targets)).values[0];
  };
  auto res = testutil::finite_diff_check(params.store, eval, grads);
  INFO(res.worst);
  CHECK(res.max_rel < 1e-4);
}

TEST_CASE("training on micro data") {
  dataio::SyntheticSpec spec = micro_spec();
  auto train_set = dataio::generate_synthetic_dataset(spec, 3, 9);

  SUBCASE("runs and logs finite losses") {
    TrainResult r = train(train_set, {}, PipelineConfig::micro(), micro_train(2));
    REQUIRE(r.log.size() == 2);
    for (const auto& e : r.log) {
      CHECK(std::isfinite(e.total));
      CHECK(e.steps > 0);
    }
  }
  SUBCASE("same seed gives bitwise-identical loss curves") {
    TrainResult a = train(train_set, {}, PipelineConfig::micro(), micro_train(2));
    TrainResult b = train(train_set, {}, PipelineConfig::micro(), micro_train(2));
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
      CHECK(a.log[i].total == b.log[i].total);
      CHECK(a.log[i].reg == b.log[i].reg);
    }
    for (const auto& [name, p] : a.params.store.params)
      CHECK(p.values == b.params.store.require(name).values);
  }
  SUBCASE("targetness ablation modes stay trainable") {
    for (auto mode : {proposal::TargetnessMode::NoConcat, proposal::TargetnessMode::NoBranch}) {
      PipelineConfig cfg = PipelineConfig::micro();
      cfg.proposal.targetness = mode;
      TrainResult r = train(train_set, {}, cfg, micro_train(1));
      CHECK(std::isfinite(r.log[0].total));
      if (mode == proposal::TargetnessMode::NoBranch) CHECK(r.log[0].cla == 0.0);
    }
  }
}

TEST_CASE("overfitting a single fixed sample collapses the loss") {
  dataio::SyntheticSpec spec = micro_spec();
  spec.frames = 2;
  auto train_set = dataio::generate_synthetic_dataset(spec, 1, 13);

  TrainConfig tcfg = micro_train(60);
  tcfg.batch_size = 1;
  tcfg.fixed_augmentation = true;
  tcfg.lr = 0.005;
  TrainResult r = train(train_set, {}, PipelineConfig::micro(), tcfg);
  REQUIRE(r.log.size() == 60);
  CHECK(r.log.back().total < 0.5 * r.log.front().total);
}

TEST_CASE("tracking protocol") {
  dataio::SyntheticSpec spec = micro_spec();
  spec.frames = 5;
  dataio::Tracklet tracklet = dataio::generate_synthetic_tracklet(spec, 19);
  PipelineConfig cfg = PipelineConfig::micro();
  PipelineParams params = PipelineParams::init(cfg, 3);
  TrackConfig tcfg;
  tcfg.seed = 7;

  SUBCASE("frame 0 returns the initial box and timings are populated") {
    TrackResult r = track(params, cfg, tracklet, tracklet.boxes[0], tcfg);
    REQUIRE(r.boxes.size() == 5);
    CHECK(r.boxes[0].center == tracklet.boxes[0].center);
    CHECK(r.boxes[0].heading == tracklet.boxes[0].heading);
    for (std::size_t t = 1; t < r.timings.size(); ++t)
      if (!r.fallback[t]) CHECK(r.timings[t].forward_ms > 0.0);
  }
  SUBCASE("no lookahead: a truncated tracklet reproduces the prefix") {
    TrackResult full = track(params, cfg, tracklet, tracklet.boxes[0], tcfg);
    dataio::Tracklet prefix = tracklet;
    prefix.frame_ids.resize(4);
    prefix.clouds.resize(4);
    prefix.boxes.resize(4);
    TrackResult cut = track(params, cfg, prefix, tracklet.boxes[0], tcfg);
    REQUIRE(cut.boxes.size() == 4);
    for (std::size_t t = 0; t < 4; ++t) {
      CHECK(cut.boxes[t].center == full.boxes[t].center);
      CHECK(cut.boxes[t].heading == full.boxes[t].heading);
    }
  }
  SUBCASE("empty search region emits the previous box and flags it") {
    // frame 2's cloud teleports out of reach of any search window
    dataio::Tracklet jump = tracklet;
    auto far_cloud = std::make_shared<pcops::PointCloud>();
    for (const auto& p : jump.clouds[2]->points)
      far_cloud->points.push_back(p + pcops::Vec3{1000, 0, 0});
    jump.clouds[2] = far_cloud;
    TrackResult r = track(params, cfg, jump, jump.boxes[0], tcfg);
    CHECK(r.fallback[2] == 1);
    CHECK(r.boxes[2].center == r.boxes[1].center);
  }
  SUBCASE("static baseline repeats the initial box") {
    TrackResult r = track_static_baseline(tracklet, tracklet.boxes[0]);
    for (const auto& b : r.boxes) CHECK(b.center == tracklet.boxes[0].center);
  }
}

TEST_CASE("ablation grids emit complete tables on micro data") {
  AblationConfig cfg;
  cfg.pipeline = PipelineConfig::micro();
  cfg.spec = micro_spec();
  cfg.train = micro_train(1);
  cfg.train_tracklets = 2;
  cfg.val_tracklets = 0;
  cfg.test_tracklets = 2;
  cfg.proposal_counts = {1, 2};

  SUBCASE("proposal count sweep reuses one model") {
    AblationTable t = run_ablation("proposal_counts", cfg);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].label == "K=1");
    for (const auto& r : t.rows) {
      CHECK(std::isfinite(r.success));
      CHECK(std::isfinite(r.precision));
    }
  }
  SUBCASE("template mode grid") {
    AblationTable t = run_ablation("template_modes", cfg);
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[0].label == "first_gt");
    CHECK(!t.format().empty());
  }
  SUBCASE("unknown experiment rejected") {
    CHECK_THROWS_AS(run_ablation("bogus", cfg), UsageError);
  }
}
