#include "p2b/pcops/kernels.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace p2b::pcops {

PointCloud normalize_count(const PointCloud& cloud, int n, Rng rng) {
  if (cloud.empty()) throw DataError("normalize_count: empty input cloud");
  if (n <= 0) throw ContractError("normalize_count: target count must be positive");
  const int m = static_cast<int>(cloud.size());
  PointCloud out;
  out.frame = cloud.frame;
  out.points.reserve(n);
  if (m >= n) {
    for (int idx : sample_without_replacement(m, n, rng)) out.points.push_back(cloud.points[idx]);
  } else {
    out.points = cloud.points;
    for (int i = m; i < n; ++i)
      out.points.push_back(cloud.points[rng.uniform_index(static_cast<std::size_t>(m))]);
  }
  return out;
}

std::vector<int> sample_without_replacement(int m_in, int m_out, Rng& rng) {
  if (m_out > m_in)
    throw ContractError("sample_without_replacement: requested " + std::to_string(m_out) +
                        " from " + std::to_string(m_in));
  std::vector<int> pool(m_in);
  std::iota(pool.begin(), pool.end(), 0);
  // partial Fisher-Yates
  for (int i = 0; i < m_out; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(m_in - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m_out);
  return pool;
}

BallQueryResult ball_query(std::span<const Vec3> centers, std::span<const Vec3> points,
                           double radius, int max_k, std::span<const int> self_indices) {
  if (points.empty()) throw DataError("ball_query: empty point set");
  if (radius <= 0.0) throw ContractError("ball_query: radius must be positive");
  if (max_k < 1) throw ContractError("ball_query: max_k must be at least 1");
  if (!self_indices.empty() && self_indices.size() != centers.size())
    throw ContractError("ball_query: self_indices size mismatch");

  BallQueryResult res;
  res.max_k = max_k;
  res.indices.assign(centers.size() * static_cast<std::size_t>(max_k), 0);
  res.counts.assign(centers.size(), 0);
  res.degenerate.assign(centers.size(), 0);

  const double r2 = radius * radius;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    int* group = res.indices.data() + c * static_cast<std::size_t>(max_k);
    int found = 0;
    int nearest = 0;
    double nearest_d2 = std::numeric_limits<double>::max();
    for (std::size_t j = 0; j < points.size(); ++j) {
      const Vec3 d = points[j] - centers[c];
      const double d2 = dot(d, d);
      if (d2 < nearest_d2) {
        nearest_d2 = d2;
        nearest = static_cast<int>(j);
      }
      if (d2 < r2) {
        group[found++] = static_cast<int>(j);
        if (found >= max_k) break;
      }
    }
    if (found == 0) {
      const int fallback = self_indices.empty() ? nearest : self_indices[c];
      res.degenerate[c] = 1;
      for (int k = 0; k < max_k; ++k) group[k] = fallback;
      res.counts[c] = 0;
      continue;
    }
    res.counts[c] = found;
    for (int k = found; k < max_k; ++k) group[k] = group[0];
  }
  return res;
}

std::vector<std::uint8_t> points_in_box(std::span<const Vec3> points, const Box3D& box,
                                        double enlarge) {
  check_box(box);
  const double hx = box.length / 2.0 + enlarge / 2.0;
  const double hy = box.width / 2.0 + enlarge / 2.0;
  const double hz = box.height / 2.0 + enlarge / 2.0;
  const double c = std::cos(-box.heading), s = std::sin(-box.heading);
  std::vector<std::uint8_t> mask(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 d = points[i] - box.center;
    const double lx = c * d[0] - s * d[1];
    const double ly = s * d[0] + c * d[1];
    mask[i] = (std::fabs(lx) <= hx && std::fabs(ly) <= hy && std::fabs(d[2]) <= hz) ? 1 : 0;
  }
  return mask;
}

PointCloud crop_points(const PointCloud& cloud, const Box3D& box, double enlarge) {
  const auto mask = points_in_box(cloud, box, enlarge);
  PointCloud out;
  out.frame = cloud.frame;
  for (std::size_t i = 0; i < cloud.points.size(); ++i)
    if (mask[i]) out.points.push_back(cloud.points[i]);
  return out;
}

Vec3 to_search_frame(const Vec3& p, const Box3D& reference) {
  return rot_z(p - reference.center, -reference.heading);
}

PointCloud to_search_frame(const PointCloud& cloud, const Box3D& reference) {
  PointCloud out;
  out.frame = Frame::SearchLocal;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back(to_search_frame(p, reference));
  return out;
}

Box3D to_search_frame(const Box3D& box, const Box3D& reference) {
  Box3D out = box;
  out.center = to_search_frame(box.center, reference);
  out.heading = wrap_angle(box.heading - reference.heading);
  return out;
}

Vec3 from_search_frame(const Vec3& p, const Box3D& reference) {
  return rot_z(p, reference.heading) + reference.center;
}

Box3D from_search_frame(const Box3D& box, const Box3D& reference) {
  Box3D out = box;
  out.center = from_search_frame(box.center, reference);
  out.heading = wrap_angle(box.heading + reference.heading);
  return out;
}

}  // namespace p2b::pcops
