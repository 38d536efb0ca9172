#include "p2b/evalkit.hpp"

#include <algorithm>
#include <cmath>

namespace p2b::evalkit {

namespace {

constexpr double kEps = 1e-9;  // collinearity tolerance for clipping

struct P2 {
  double x, y;
};

// CCW corners of the box's bird's-eye-view rectangle.
std::vector<P2> bev_corners(const Box3D& b) {
  const double hx = b.length / 2.0, hy = b.width / 2.0;
  const double c = std::cos(b.heading), s = std::sin(b.heading);
  std::vector<P2> out;
  const double lx[4] = {hx, -hx, -hx, hx};
  const double ly[4] = {hy, hy, -hy, -hy};
  for (int i = 0; i < 4; ++i)
    out.push_back({b.center[0] + c * lx[i] - s * ly[i], b.center[1] + s * lx[i] + c * ly[i]});
  return out;
}

double polygon_area(const std::vector<P2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const P2& p = poly[i];
    const P2& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::fabs(a) / 2.0;
}

// Sutherland-Hodgman clip of `subject` by the half-plane left of a->b.
std::vector<P2> clip_halfplane(const std::vector<P2>& subject, const P2& a, const P2& b) {
  auto side = [&](const P2& p) {
    return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
  };
  std::vector<P2> out;
  const std::size_t n = subject.size();
  for (std::size_t i = 0; i < n; ++i) {
    const P2& cur = subject[i];
    const P2& nxt = subject[(i + 1) % n];
    const double sc = side(cur), sn = side(nxt);
    if (sc >= -kEps) out.push_back(cur);
    if ((sc > kEps && sn < -kEps) || (sc < -kEps && sn > kEps)) {
      const double t = sc / (sc - sn);
      out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
    }
  }
  return out;
}

}  // namespace

double bev_overlap(const Box3D& a, const Box3D& b) {
  pcops::check_box(a);
  pcops::check_box(b);
  std::vector<P2> poly = bev_corners(a);
  const std::vector<P2> clip = bev_corners(b);
  for (std::size_t i = 0; i < clip.size() && !poly.empty(); ++i)
    poly = clip_halfplane(poly, clip[i], clip[(i + 1) % clip.size()]);
  if (poly.size() < 3) return 0.0;
  return polygon_area(poly);
}

double iou3d(const Box3D& a, const Box3D& b) {
  const double overlap_bev = bev_overlap(a, b);
  const double za0 = a.center[2] - a.height / 2.0, za1 = a.center[2] + a.height / 2.0;
  const double zb0 = b.center[2] - b.height / 2.0, zb1 = b.center[2] + b.height / 2.0;
  const double dz = std::max(0.0, std::min(za1, zb1) - std::max(za0, zb0));
  const double inter = overlap_bev * dz;
  const double va = a.length * a.width * a.height;
  const double vb = b.length * b.width * b.height;
  const double uni = va + vb - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double center_error(const Box3D& a, const Box3D& b) { return pcops::norm(a.center - b.center); }

double success_auc(const std::vector<double>& ious) {
  if (ious.empty()) throw DataError("success_auc: no frames");
  double s = 0.0;
  for (double v : ious) s += v;
  return 100.0 * s / static_cast<double>(ious.size());
}

double precision_auc(const std::vector<double>& errors) {
  if (errors.empty()) throw DataError("precision_auc: no frames");
  double s = 0.0;
  for (double e : errors) {
    if (e < 0.0) throw ContractError("precision_auc: negative error");
    s += (2.0 - std::min(e, 2.0)) / 2.0;
  }
  return 100.0 * s / static_cast<double>(errors.size());
}

OpeReport ope_report(const std::vector<double>& ious, const std::vector<double>& errors) {
  if (ious.size() != errors.size()) throw ContractError("ope_report: length mismatch");
  OpeReport r;
  r.ious = ious;
  r.center_errors = errors;
  r.frames = ious.size();
  r.success = success_auc(ious);
  r.precision = precision_auc(errors);
  return r;
}

std::vector<std::size_t> histogram_counts(const std::vector<std::size_t>& values,
                                          const std::vector<std::size_t>& edges) {
  if (edges.empty()) throw ContractError("histogram_counts: no bin edges");
  std::vector<std::size_t> counts(edges.size() + 1, 0);
  for (std::size_t v : values) {
    std::size_t bin = edges.size();
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (v < edges[i]) {
        bin = i;
        break;
      }
    ++counts[bin];
  }
  return counts;
}

std::vector<BucketRow> success_vs_initial_points(
    const std::vector<std::vector<double>>& per_tracklet_ious,
    const std::vector<std::size_t>& initial_points, const std::vector<std::size_t>& edges) {
  if (per_tracklet_ious.size() != initial_points.size())
    throw ContractError("success_vs_initial_points: length mismatch");
  struct Acc {
    std::size_t tracklets = 0, frames = 0;
    double iou_sum = 0.0;
  };
  std::vector<Acc> acc(edges.size() + 1);
  for (std::size_t t = 0; t < per_tracklet_ious.size(); ++t) {
    std::size_t bin = edges.size();
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (initial_points[t] < edges[i]) {
        bin = i;
        break;
      }
    acc[bin].tracklets += 1;
    acc[bin].frames += per_tracklet_ious[t].size();
    for (double v : per_tracklet_ious[t]) acc[bin].iou_sum += v;
  }
  std::vector<BucketRow> rows;
  for (std::size_t b = 0; b < acc.size(); ++b) {
    if (acc[b].tracklets == 0) continue;
    BucketRow row;
    if (b == 0)
      row.label = "<" + std::to_string(edges[0]);
    else if (b == edges.size())
      row.label = ">=" + std::to_string(edges.back());
    else
      row.label = "[" + std::to_string(edges[b - 1]) + "," + std::to_string(edges[b]) + ")";
    row.tracklets = acc[b].tracklets;
    row.frames = acc[b].frames;
    row.success = acc[b].frames ? 100.0 * acc[b].iou_sum / static_cast<double>(acc[b].frames) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace p2b::evalkit
