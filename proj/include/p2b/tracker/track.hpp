#pragma once

#include "p2b/tracker/pipeline.hpp"

namespace p2b::tracker {

struct TrackConfig {
  dataio::TemplateMode template_mode = dataio::TemplateMode::FirstAndPrevious;
  std::uint64_t seed = 0;
};

struct FrameTiming {
  double preprocess_ms = 0.0;
  double forward_ms = 0.0;
  double postprocess_ms = 0.0;
};

struct TrackResult {
  std::vector<pcops::Box3D> boxes;      // sensor frame; boxes[0] is the initial GT
  std::vector<FrameTiming> timings;
  std::vector<std::uint8_t> fallback;   // 1 where the previous box was emitted
};

// Frame-by-frame inference: template and search construction, forward pass,
// verification, mapping back into the sensor frame. Empty search crops emit
// the previous box and are flagged.
TrackResult track(PipelineParams& params, const PipelineConfig& cfg,
                  const dataio::Tracklet& tracklet, const pcops::Box3D& initial_box,
                  const TrackConfig& tcfg);

// Baseline that repeats the previous (hence the initial) box every frame.
TrackResult track_static_baseline(const dataio::Tracklet& tracklet,
                                  const pcops::Box3D& initial_box);

struct EvalOutcome {
  double success = 0.0;
  double precision = 0.0;
  std::size_t frames = 0;
  std::vector<std::vector<double>> per_tracklet_ious;
  std::vector<std::vector<double>> per_tracklet_errors;
};

// OPE over a set of tracklets, frame-weighted across tracklets.
EvalOutcome evaluate_tracking(PipelineParams& params, const PipelineConfig& cfg,
                              const std::vector<dataio::Tracklet>& tracklets,
                              const TrackConfig& tcfg);

EvalOutcome evaluate_results(const std::vector<dataio::Tracklet>& tracklets,
                             const std::vector<TrackResult>& results);

}  // namespace p2b::tracker
