#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "p2b/pcops/types.hpp"

namespace p2b::pcops {

// Resample a cloud to exactly n points by randomly abandoning (when larger)
// or duplicating (when smaller). Output points always come from the input.
PointCloud normalize_count(const PointCloud& cloud, int n, Rng rng);

// Uniform sample without replacement of m_out indices from [0, m_in).
std::vector<int> sample_without_replacement(int m_in, int m_out, Rng& rng);

struct BallQueryResult {
  int max_k = 0;
  std::vector<int> indices;         // centers x max_k, padded by the first member
  std::vector<int> counts;          // qualifying members per center (before padding)
  std::vector<std::uint8_t> degenerate;  // 1 when no point fell inside the ball

  std::span<const int> group(int center) const {
    return {indices.data() + static_cast<std::size_t>(center) * max_k,
            static_cast<std::size_t>(max_k)};
  }
};

// All point indices strictly within `radius` of each center, capped at max_k,
// padded by repeating the first member. An empty ball falls back to the
// center's own index when `self_indices` identifies the center inside
// `points`, otherwise to the nearest point, and the group is flagged.
BallQueryResult ball_query(std::span<const Vec3> centers, std::span<const Vec3> points,
                           double radius, int max_k,
                           std::span<const int> self_indices = {});

// Mask of points inside the box enlarged by `enlarge` meters per extent
// (enlarge/2 added to each half-extent on all three axes). Boundary counts
// as inside.
std::vector<std::uint8_t> points_in_box(std::span<const Vec3> points, const Box3D& box,
                                        double enlarge);

inline std::vector<std::uint8_t> points_in_box(const PointCloud& cloud, const Box3D& box,
                                               double enlarge) {
  return points_in_box(std::span<const Vec3>(cloud.points), box, enlarge);
}

// Order-preserving filter by points_in_box.
PointCloud crop_points(const PointCloud& cloud, const Box3D& box, double enlarge);

// Translate by -reference.center, rotate by -reference.heading.
PointCloud to_search_frame(const PointCloud& cloud, const Box3D& reference);
Vec3 to_search_frame(const Vec3& p, const Box3D& reference);
Box3D to_search_frame(const Box3D& box, const Box3D& reference);

// Inverse transform back into the reference's frame.
Box3D from_search_frame(const Box3D& box, const Box3D& reference);
Vec3 from_search_frame(const Vec3& p, const Box3D& reference);

}  // namespace p2b::pcops
