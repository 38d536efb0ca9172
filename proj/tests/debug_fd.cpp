#include <cstdio>

#include "p2b/dataio/synthetic.hpp"
#include "p2b/tracker/track.hpp"
#include "p2b/tracker/train.hpp"

using namespace p2b;
using namespace p2b::tracker;

int main() {
  PipelineConfig cfg = PipelineConfig::micro();
  cfg.pos_distance = 1.0;
  cfg.neg_distance = 1.5;

  dataio::SyntheticSpec spec;
  spec.frames = 4;
  spec.length = 2.0;
  spec.width = 1.2;
  spec.height = 1.0;
  spec.points_on_target = 12;
  spec.clutter_points = 6;
  spec.step_translation = 0.15;
  dataio::Tracklet tracklet = dataio::generate_synthetic_tracklet(spec, 3);
  auto sample = dataio::augment_training_sample(tracklet, 1, cfg.sample, Rng(11));

  PipelineParams params = PipelineParams::init(cfg, 17);
  ForwardPlan plan;
  losses::ProposalTargets targets;
  {
    diffcore::Graph g;
    diffcore::Binding ctx(g, params.store, true);
    ForwardOutputs out =
        forward(ctx, sample->template_cloud, sample->search_cloud, cfg, Rng(23), nullptr, &plan);
    LossBreakdown bd;
    training_loss(ctx, out, sample->gt_box, cfg, &bd, nullptr, &targets);
    std::printf("base: total=%.6f reg=%.6f cla=%.6f prop=%.6f box=%.6f pos=%d\n", bd.total,
                bd.reg, bd.cla, bd.prop, bd.box, bd.positive_proposals);
  }

  auto eval = [&](diffcore::ParamStore& s, LossBreakdown* bd) {
    diffcore::Graph g;
    diffcore::Binding ctx(g, s, true);
    ForwardOutputs out =
        forward(ctx, sample->template_cloud, sample->search_cloud, cfg, Rng(23), &plan);
    return g.value(training_loss(ctx, out, sample->gt_box, cfg, bd, &targets)).values[0];
  };

  auto& p = params.store.require("backbone.sa2.2.beta");
  const double keep = p.values[0];
  for (double h : {1e-5, 1e-6, 1e-7, 0.0}) {
    LossBreakdown up, dn;
    p.values[0] = keep + h;
    const double lu = eval(params.store, &up);
    p.values[0] = keep - h;
    const double ld = eval(params.store, &dn);
    p.values[0] = keep;
    std::printf("h=%g: up=%.9f dn=%.9f d=%.9f | dreg=%.3g dcla=%.3g dprop=%.3g dbox=%.3g\n", h,
                lu, ld, lu - ld, up.reg - dn.reg, up.cla - dn.cla, up.prop - dn.prop,
                up.box - dn.box);
  }
  return 0;
}
