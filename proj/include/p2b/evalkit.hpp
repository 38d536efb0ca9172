#pragma once

#include <map>
#include <string>
#include <vector>

#include "p2b/pcops/types.hpp"

namespace p2b::evalkit {

using pcops::Box3D;
using pcops::Vec3;

// Rotated-box IoU: bird's-eye-view polygon intersection times vertical
// overlap, over the union of volumes.
double iou3d(const Box3D& a, const Box3D& b);

// Area of the intersection of the two boxes' bird's-eye-view rectangles.
double bev_overlap(const Box3D& a, const Box3D& b);

double center_error(const Box3D& a, const Box3D& b);

// Success: AUC of the fraction-of-frames-with-IoU>tau curve over tau in
// [0, 1]. Under the step-function convention this equals mean IoU x 100.
double success_auc(const std::vector<double>& ious);

// Precision: AUC of the fraction-of-frames-with-error<=d curve over
// d in [0, 2 m], normalized by 2 m, x 100. The step curve is integrated
// exactly: each frame contributes (2 - min(e, 2)) / 2.
double precision_auc(const std::vector<double>& errors);

struct OpeReport {
  double success = 0.0;    // percent
  double precision = 0.0;  // percent
  std::vector<double> ious;
  std::vector<double> center_errors;
  std::size_t frames = 0;
};

OpeReport ope_report(const std::vector<double>& ious, const std::vector<double>& errors);

// Histogram over `edges`: bin 0 holds counts < edges[0], bin i holds
// [edges[i-1], edges[i]), the last bin >= edges.back().
std::vector<std::size_t> histogram_counts(const std::vector<std::size_t>& values,
                                          const std::vector<std::size_t>& edges);

struct BucketRow {
  std::string label;
  std::size_t tracklets = 0;
  std::size_t frames = 0;
  double success = 0.0;
};

// Frame-weighted Success per bucket of first-frame on-target point counts.
// Buckets with no tracklets are omitted.
std::vector<BucketRow> success_vs_initial_points(
    const std::vector<std::vector<double>>& per_tracklet_ious,
    const std::vector<std::size_t>& initial_points, const std::vector<std::size_t>& edges);

}  // namespace p2b::evalkit
