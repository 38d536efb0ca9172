#pragma once

#include <optional>
#include <span>

#include "p2b/dataio/tracklet.hpp"
#include "p2b/pcops/kernels.hpp"

namespace p2b::dataio {

enum class TemplateMode { FirstGt, PreviousResult, FirstAndPrevious, AllPrevious };

const char* to_string(TemplateMode m);
TemplateMode template_mode_from_string(const std::string& s);

struct SampleConfig {
  int template_points = 512;       // N1
  int search_points = 1024;        // N2
  double search_enlarge = 2.0;     // meters added per extent around the search box
  double offset_xy = 0.3;          // training jitter bound, meters
  double offset_heading = 5.0 * kPi / 180.0;
};

struct TemplateResult {
  pcops::PointCloud cloud;   // template-canonical frame, N1 points
  pcops::Box3D reference;    // extents source (the first GT box)
};

// Crops the mode's box(es) (enlarge 0), expresses each crop in its own
// box-canonical frame, fuses by concatenation and normalizes the count.
// Returns nothing on template starvation (no point in any crop).
std::optional<TemplateResult> build_template(const Tracklet& tracklet, int frame_idx,
                                             TemplateMode mode,
                                             std::span<const pcops::Box3D> previous_results,
                                             const SampleConfig& cfg, Rng rng);

// Crop around the previous result (enlarged), re-expressed in the search
// frame. Returns nothing when the crop is empty (tracker falls back).
std::optional<pcops::PointCloud> build_search_area(const pcops::PointCloud& frame_cloud,
                                                   const pcops::Box3D& previous_box,
                                                   const SampleConfig& cfg, Rng rng);

struct TrainingSample {
  pcops::PointCloud template_cloud;  // N1, template-canonical frame
  pcops::PointCloud search_cloud;    // N2, search frame
  pcops::Box3D gt_box;               // search frame
  pcops::Box3D template_box;         // extents source
};

// Template from the first GT plus a randomly offset previous-GT crop; search
// region from the current GT enlarged and jittered. Returns nothing when the
// sample is degenerate (empty template or no on-target point in the search
// region).
std::optional<TrainingSample> augment_training_sample(const Tracklet& tracklet, int frame_idx,
                                                      const SampleConfig& cfg, Rng rng);

// Random box jitter used by training-sample construction.
pcops::Box3D offset_box(const pcops::Box3D& box, const SampleConfig& cfg, Rng& rng);

}  // namespace p2b::dataio
