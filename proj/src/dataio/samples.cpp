#include "p2b/dataio/samples.hpp"

namespace p2b::dataio {

const char* to_string(TemplateMode m) {
  switch (m) {
    case TemplateMode::FirstGt: return "first_gt";
    case TemplateMode::PreviousResult: return "previous_result";
    case TemplateMode::FirstAndPrevious: return "first_and_previous";
    case TemplateMode::AllPrevious: return "all_previous";
  }
  return "first_and_previous";
}

TemplateMode template_mode_from_string(const std::string& s) {
  if (s == "first_gt") return TemplateMode::FirstGt;
  if (s == "previous_result") return TemplateMode::PreviousResult;
  if (s == "first_and_previous") return TemplateMode::FirstAndPrevious;
  if (s == "all_previous") return TemplateMode::AllPrevious;
  throw UsageError("unknown template mode: " + s);
}

namespace {

// Crop inside the box (enlarge 0) and express in the box-canonical frame.
pcops::PointCloud canonical_crop(const pcops::PointCloud& cloud, const pcops::Box3D& box) {
  return pcops::to_search_frame(pcops::crop_points(cloud, box, 0.0), box);
}

void append(pcops::PointCloud& into, const pcops::PointCloud& from) {
  into.points.insert(into.points.end(), from.points.begin(), from.points.end());
}

}  // namespace

std::optional<TemplateResult> build_template(const Tracklet& tracklet, int frame_idx,
                                             TemplateMode mode,
                                             std::span<const pcops::Box3D> previous_results,
                                             const SampleConfig& cfg, Rng rng) {
  if (frame_idx <= 0 || frame_idx >= static_cast<int>(tracklet.size()))
    throw ContractError("build_template: frame index out of range");
  if (static_cast<int>(previous_results.size()) < frame_idx)
    throw ContractError("build_template: previous results missing");

  pcops::PointCloud fused;
  fused.frame = pcops::Frame::SearchLocal;
  auto add_crop = [&](int frame, const pcops::Box3D& box) {
    append(fused, canonical_crop(*tracklet.clouds[frame], box));
  };
  switch (mode) {
    case TemplateMode::FirstGt:
      add_crop(0, tracklet.boxes[0]);
      break;
    case TemplateMode::PreviousResult:
      add_crop(frame_idx - 1, previous_results[frame_idx - 1]);
      break;
    case TemplateMode::FirstAndPrevious:
      add_crop(0, tracklet.boxes[0]);
      add_crop(frame_idx - 1, previous_results[frame_idx - 1]);
      break;
    case TemplateMode::AllPrevious:
      for (int f = 0; f < frame_idx; ++f) add_crop(f, previous_results[f]);
      break;
  }
  if (fused.empty()) return std::nullopt;  // template starvation
  TemplateResult out;
  out.cloud = pcops::normalize_count(fused, cfg.template_points, rng);
  out.cloud.frame = pcops::Frame::SearchLocal;
  out.reference = tracklet.boxes[0];
  return out;
}

std::optional<pcops::PointCloud> build_search_area(const pcops::PointCloud& frame_cloud,
                                                   const pcops::Box3D& previous_box,
                                                   const SampleConfig& cfg, Rng rng) {
  pcops::PointCloud crop = pcops::crop_points(frame_cloud, previous_box, cfg.search_enlarge);
  if (crop.empty()) return std::nullopt;
  return pcops::normalize_count(pcops::to_search_frame(crop, previous_box), cfg.search_points,
                                rng);
}

pcops::Box3D offset_box(const pcops::Box3D& box, const SampleConfig& cfg, Rng& rng) {
  pcops::Box3D out = box;
  out.center.x += rng.uniform(-cfg.offset_xy, cfg.offset_xy);
  out.center.y += rng.uniform(-cfg.offset_xy, cfg.offset_xy);
  out.heading = wrap_angle(out.heading + rng.uniform(-cfg.offset_heading, cfg.offset_heading));
  return out;
}

std::optional<TrainingSample> augment_training_sample(const Tracklet& tracklet, int frame_idx,
                                                      const SampleConfig& cfg, Rng rng) {
  if (frame_idx <= 0 || frame_idx >= static_cast<int>(tracklet.size()))
    throw ContractError("augment_training_sample: frame needs a predecessor");
  Rng jitter_rng = rng.fork(1);
  Rng template_rng = rng.fork(2);
  Rng search_rng = rng.fork(3);

  // template: first GT crop plus a jittered previous-GT crop
  pcops::PointCloud fused;
  fused.frame = pcops::Frame::SearchLocal;
  append(fused, canonical_crop(*tracklet.clouds[0], tracklet.boxes[0]));
  const pcops::Box3D prev_jittered = offset_box(tracklet.boxes[frame_idx - 1], cfg, jitter_rng);
  append(fused, canonical_crop(*tracklet.clouds[frame_idx - 1], prev_jittered));
  if (fused.empty()) return std::nullopt;

  // search region: current GT enlarged, under a similar random offset
  const pcops::Box3D gt = tracklet.boxes[frame_idx];
  const pcops::Box3D search_box = offset_box(gt, cfg, jitter_rng);
  pcops::PointCloud crop = pcops::crop_points(*tracklet.clouds[frame_idx], search_box,
                                              cfg.search_enlarge);
  if (crop.empty()) return std::nullopt;
  const auto on_target = pcops::points_in_box(crop, gt, 0.0);
  bool any = false;
  for (auto v : on_target) any = any || v != 0;
  if (!any) return std::nullopt;  // degenerate: nothing to supervise

  TrainingSample s;
  s.template_cloud = pcops::normalize_count(fused, cfg.template_points, template_rng);
  s.template_cloud.frame = pcops::Frame::SearchLocal;
  s.search_cloud = pcops::normalize_count(pcops::to_search_frame(crop, search_box),
                                          cfg.search_points, search_rng);
  s.gt_box = pcops::to_search_frame(gt, search_box);
  s.template_box = tracklet.boxes[0];
  return s;
}

}  // namespace p2b::dataio
