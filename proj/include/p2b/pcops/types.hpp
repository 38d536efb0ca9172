#pragma once

#include <cmath>
#include <vector>

#include "p2b/common.hpp"

namespace p2b::pcops {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  bool operator==(const Vec3&) const = default;
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Rotate about the vertical (+z) axis.
inline Vec3 rot_z(const Vec3& p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
}

enum class Frame { Sensor, SearchLocal };

struct PointCloud {
  std::vector<Vec3> points;
  Frame frame = Frame::Sensor;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Oriented 3-D box. Single axis convention used throughout: z is up,
// heading is the yaw about +z in radians, normalized to (-pi, pi]. The box
// local frame has x along `length`, y along `width`, z along `height`;
// `center` is the geometric center. KITTI camera-frame labels are converted
// into this convention once, at ingestion (see dataio).
struct Box3D {
  Vec3 center{0, 0, 0};
  double length = 1.0;  // extent along local x
  double width = 1.0;   // extent along local y
  double height = 1.0;  // extent along local z
  double heading = 0.0;
};

inline Box3D make_box(Vec3 center, double length, double width, double height, double heading) {
  Box3D b;
  b.center = center;
  b.length = length;
  b.width = width;
  b.height = height;
  b.heading = wrap_angle(heading);
  return b;
}

inline void check_box(const Box3D& b) {
  if (!(b.length > 0.0 && b.width > 0.0 && b.height > 0.0))
    throw ContractError("Box3D: extents must be positive");
}

}  // namespace p2b::pcops
