#pragma once

#include <memory>
#include <string>
#include <vector>

#include "p2b/pcops/types.hpp"

namespace p2b::dataio {

// One target instance: time-ordered frames of (sensor-frame cloud, GT box).
// Clouds are shared because several tracklets of one scene see the same frame.
struct Tracklet {
  std::string scene;
  int track_id = 0;
  std::string category = "Car";
  std::vector<int> frame_ids;
  std::vector<std::shared_ptr<const pcops::PointCloud>> clouds;
  std::vector<pcops::Box3D> boxes;

  std::size_t size() const { return boxes.size(); }
};

}  // namespace p2b::dataio
