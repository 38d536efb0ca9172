#pragma once

#include <filesystem>
#include <optional>

#include "p2b/dataio/tracklet.hpp"

namespace p2b::dataio {

// Ground-truth rows for one track inside one scene, boxes only.
struct TrackletLabels {
  std::string scene;
  int track_id = 0;
  std::string category;
  std::vector<int> frames;
  std::vector<pcops::Box3D> boxes;
};

// KITTI tracking label row:
//   frame track_id type truncated occluded alpha bbox(4) h w l x y z rotation_y
// Rows of type DontCare are dropped; only Car, Pedestrian, Van and Cyclist
// tracks are retained.
std::vector<TrackletLabels> parse_kitti_labels(const std::string& text, const std::string& scene);

// Consecutive little-endian float32 x, y, z, intensity records; intensity is
// discarded.
pcops::PointCloud load_velodyne_bin(const std::string& bytes);
std::string velodyne_bytes(const pcops::PointCloud& cloud);

// velodyne -> rectified camera rigid transform (R_rect * Tr_velo_cam).
// Identity when the scene ships no calib file (synthetic datasets).
struct Calib {
  double m[12] = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};  // row-major 3x4
  bool identity = true;

  pcops::Vec3 apply(const pcops::Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z + m[3],
            m[4] * v.x + m[5] * v.y + m[6] * v.z + m[7],
            m[8] * v.x + m[9] * v.y + m[10] * v.z + m[11]};
  }
};

Calib parse_calib(const std::string& text);

// Conversions between the KITTI camera frame (x right, y down, z forward,
// boxes anchored at the bottom face) and the internal z-up convention.
pcops::Box3D box_from_kitti(double h, double w, double l, double x, double y, double z,
                            double ry);
void box_to_kitti(const pcops::Box3D& box, double& h, double& w, double& l, double& x, double& y,
                  double& z, double& ry);
pcops::Vec3 internal_from_cam(const pcops::Vec3& cam);
pcops::Vec3 cam_from_internal(const pcops::Vec3& p);

// Dataset layout: <root>/label_02/<scene>.txt, <root>/velodyne/<scene>/<frame>.bin,
// optional <root>/calib/<scene>.txt. Tracklets shorter than min_frames are
// dropped.
std::vector<Tracklet> load_kitti_tracklets(const std::filesystem::path& root,
                                           const std::vector<std::string>& scenes,
                                           const std::string& category_filter = "",
                                           std::size_t min_frames = 2);

// Writes tracklets as a KITTI-layout dataset (used by the synthetic
// generator); each tracklet becomes one single-track scene.
void write_kitti_dataset(const std::filesystem::path& root,
                         const std::vector<Tracklet>& tracklets);

std::vector<std::string> read_split_file(const std::filesystem::path& path);

}  // namespace p2b::dataio
