#pragma once

#include <map>

#include "p2b/dataio/tracklet.hpp"

namespace p2b::dataio {

// Desk-scale scene recipe: a rigid box-surface point set follows a smooth
// random walk through static uniform clutter; GT boxes are exact by
// construction.
struct SyntheticSpec {
  int frames = 10;
  double length = 3.9;
  double width = 1.6;
  double height = 1.56;
  int points_on_target = 128;
  int clutter_points = 256;
  double noise_sigma = 0.0;        // per-frame jitter on target points, meters
  double step_translation = 0.25;  // forward step bound per frame, meters
  double step_rotation = 0.08;     // heading change bound per frame, radians
  double clutter_margin = 4.0;     // clutter region beyond the trajectory
  double start_heading_range = kPi;

  static SyntheticSpec from_config(const std::map<std::string, std::string>& kv);
  std::map<std::string, std::string> to_config() const;
};

SyntheticSpec parse_synthetic_spec(const std::string& text);
std::string synthetic_spec_text(const SyntheticSpec& spec);

Tracklet generate_synthetic_tracklet(const SyntheticSpec& spec, std::uint64_t seed);

std::vector<Tracklet> generate_synthetic_dataset(const SyntheticSpec& spec, int count,
                                                 std::uint64_t seed);

}  // namespace p2b::dataio
