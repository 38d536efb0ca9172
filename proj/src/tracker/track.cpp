#include "p2b/tracker/track.hpp"

#include <chrono>

#include "p2b/evalkit.hpp"

namespace p2b::tracker {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

TrackResult track(PipelineParams& params, const PipelineConfig& cfg,
                  const dataio::Tracklet& tracklet, const pcops::Box3D& initial_box,
                  const TrackConfig& tcfg) {
  if (tracklet.size() < 2) throw ContractError("track: tracklet needs at least 2 frames");
  Rng root(tcfg.seed);

  TrackResult result;
  result.boxes.push_back(initial_box);
  result.timings.push_back({});
  result.fallback.push_back(0);

  std::optional<dataio::TemplateResult> cached_template;
  for (int t = 1; t < static_cast<int>(tracklet.size()); ++t) {
    Rng frame_rng = root.fork(static_cast<std::uint64_t>(t));
    const pcops::Box3D previous = result.boxes.back();
    FrameTiming timing;

    const auto t_pre = std::chrono::steady_clock::now();
    auto templ = dataio::build_template(tracklet, t, tcfg.template_mode, result.boxes,
                                        cfg.sample, frame_rng.fork(1));
    if (!templ)  // starvation: fall back to the first-GT template
      templ = dataio::build_template(tracklet, t, dataio::TemplateMode::FirstGt, result.boxes,
                                     cfg.sample, frame_rng.fork(1));
    if (templ)
      cached_template = templ;
    else if (cached_template)
      templ = cached_template;
    else
      throw DataError("track: no template point in the initial ground-truth box");

    auto search = dataio::build_search_area(*tracklet.clouds[t], previous, cfg.sample,
                                            frame_rng.fork(2));
    timing.preprocess_ms = ms_since(t_pre);
    if (!search) {
      result.boxes.push_back(previous);
      result.timings.push_back(timing);
      result.fallback.push_back(1);
      continue;
    }

    const auto t_fwd = std::chrono::steady_clock::now();
    diffcore::Graph g;
    diffcore::Binding ctx(g, params.store, false);
    ForwardOutputs out = forward(ctx, templ->cloud, *search, cfg, frame_rng.fork(3));
    timing.forward_ms = ms_since(t_fwd);

    const auto t_post = std::chrono::steady_clock::now();
    const proposal::ProposalValues values =
        proposal::materialize(g, out.proposals, templ->reference, cfg.proposal.sincos_heading);
    const int best = proposal::select_best(values.scores);
    const pcops::Box3D box = pcops::from_search_frame(values.boxes[best], previous);
    timing.postprocess_ms = ms_since(t_post);

    result.boxes.push_back(box);
    result.timings.push_back(timing);
    result.fallback.push_back(0);
  }
  return result;
}

TrackResult track_static_baseline(const dataio::Tracklet& tracklet,
                                  const pcops::Box3D& initial_box) {
  TrackResult result;
  for (std::size_t t = 0; t < tracklet.size(); ++t) {
    result.boxes.push_back(initial_box);
    result.timings.push_back({});
    result.fallback.push_back(0);
  }
  return result;
}

EvalOutcome evaluate_results(const std::vector<dataio::Tracklet>& tracklets,
                             const std::vector<TrackResult>& results) {
  if (tracklets.size() != results.size())
    throw ContractError("evaluate_results: tracklet/result count mismatch");
  EvalOutcome out;
  std::vector<double> all_ious, all_errors;
  for (std::size_t t = 0; t < tracklets.size(); ++t) {
    if (results[t].boxes.size() != tracklets[t].size())
      throw DataError("evaluate_results: frame counts differ for tracklet " +
                      std::to_string(t));
    std::vector<double> ious, errors;
    for (std::size_t f = 0; f < tracklets[t].size(); ++f) {
      ious.push_back(evalkit::iou3d(results[t].boxes[f], tracklets[t].boxes[f]));
      errors.push_back(evalkit::center_error(results[t].boxes[f], tracklets[t].boxes[f]));
    }
    all_ious.insert(all_ious.end(), ious.begin(), ious.end());
    all_errors.insert(all_errors.end(), errors.begin(), errors.end());
    out.per_tracklet_ious.push_back(std::move(ious));
    out.per_tracklet_errors.push_back(std::move(errors));
  }
  out.frames = all_ious.size();
  out.success = evalkit::success_auc(all_ious);
  out.precision = evalkit::precision_auc(all_errors);
  return out;
}

EvalOutcome evaluate_tracking(PipelineParams& params, const PipelineConfig& cfg,
                              const std::vector<dataio::Tracklet>& tracklets,
                              const TrackConfig& tcfg) {
  std::vector<TrackResult> results;
  for (std::size_t t = 0; t < tracklets.size(); ++t) {
    TrackConfig per = tcfg;
    per.seed = splitmix64(tcfg.seed ^ (t * 0x9e3779b97f4a7c15ULL + 1));
    results.push_back(track(params, cfg, tracklets[t], tracklets[t].boxes[0], per));
  }
  return evaluate_results(tracklets, results);
}

}  // namespace p2b::tracker
