#include "p2b/dataio/synthetic.hpp"

#include <cmath>
#include <sstream>

#include "p2b/pcops/kernels.hpp"

namespace p2b::dataio {

namespace {

// Inward margin keeping surface samples inside the box through float32
// serialization and rigid-transform round-off.
constexpr double kSurfaceMargin = 1e-3;

pcops::Vec3 sample_box_surface(double hx, double hy, double hz, Rng& rng) {
  const double axy = hx * hy, axz = hx * hz, ayz = hy * hz;
  const double total = 2.0 * (axy + axz + ayz);
  double pick = rng.uniform01() * total;
  const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
  double u = rng.uniform(-1.0, 1.0), v = rng.uniform(-1.0, 1.0);
  if (pick < 2.0 * axy) return {u * hx, v * hy, sign * hz};
  pick -= 2.0 * axy;
  if (pick < 2.0 * axz) return {u * hx, sign * hy, v * hz};
  return {sign * hx, u * hy, v * hz};
}

}  // namespace

Tracklet generate_synthetic_tracklet(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.frames < 2) throw ContractError("synthetic tracklet needs at least 2 frames");
  Rng rng(seed);
  Rng shape_rng = rng.fork(1);
  Rng walk_rng = rng.fork(2);
  Rng clutter_rng = rng.fork(3);
  Rng noise_rng = rng.fork(4);

  const double hx = spec.length / 2.0 - kSurfaceMargin;
  const double hy = spec.width / 2.0 - kSurfaceMargin;
  const double hz = spec.height / 2.0 - kSurfaceMargin;
  std::vector<pcops::Vec3> local(spec.points_on_target);
  for (auto& p : local) p = sample_box_surface(hx, hy, hz, shape_rng);

  // smooth random walk: heading drifts, motion mostly along the heading
  std::vector<pcops::Box3D> boxes;
  double heading = walk_rng.uniform(-spec.start_heading_range, spec.start_heading_range);
  pcops::Vec3 center{0, 0, spec.height / 2.0};
  for (int f = 0; f < spec.frames; ++f) {
    boxes.push_back(pcops::make_box(center, spec.length, spec.width, spec.height, heading));
    const double speed = walk_rng.uniform(0.4, 1.0) * spec.step_translation;
    const double lateral = walk_rng.uniform(-0.25, 0.25) * spec.step_translation;
    heading = wrap_angle(heading + walk_rng.uniform(-spec.step_rotation, spec.step_rotation));
    center = center + pcops::rot_z({speed, lateral, 0.0}, heading);
    center.z += walk_rng.uniform(-0.02, 0.02);
  }

  // static clutter over the trajectory's bounding region
  pcops::Vec3 lo = boxes.front().center, hi = boxes.front().center;
  for (const auto& b : boxes)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], b.center[a]);
      hi[a] = std::max(hi[a], b.center[a]);
    }
  const double m = spec.clutter_margin;
  std::vector<pcops::Vec3> clutter(spec.clutter_points);
  for (auto& p : clutter)
    p = {clutter_rng.uniform(lo.x - m, hi.x + m), clutter_rng.uniform(lo.y - m, hi.y + m),
         clutter_rng.uniform(std::max(0.0, lo.z - m / 2), hi.z + m / 2)};

  Tracklet t;
  t.scene = "synthetic";
  t.track_id = 0;
  t.category = "Car";
  for (int f = 0; f < spec.frames; ++f) {
    auto cloud = std::make_shared<pcops::PointCloud>();
    cloud->frame = pcops::Frame::Sensor;
    cloud->points.reserve(local.size() + clutter.size());
    for (const pcops::Vec3& p : local) {
      pcops::Vec3 world = pcops::rot_z(p, boxes[f].heading) + boxes[f].center;
      if (spec.noise_sigma > 0.0)
        world = world + pcops::Vec3{noise_rng.normal(0, spec.noise_sigma),
                                    noise_rng.normal(0, spec.noise_sigma),
                                    noise_rng.normal(0, spec.noise_sigma)};
      cloud->points.push_back(world);
    }
    for (const pcops::Vec3& p : clutter) cloud->points.push_back(p);
    t.frame_ids.push_back(f);
    t.clouds.push_back(std::move(cloud));
    t.boxes.push_back(boxes[f]);
  }
  return t;
}

std::vector<Tracklet> generate_synthetic_dataset(const SyntheticSpec& spec, int count,
                                                 std::uint64_t seed) {
  std::vector<Tracklet> out;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    Tracklet t = generate_synthetic_tracklet(spec, rng.fork(i).seed());
    t.scene = "synthetic_" + std::to_string(i);
    out.push_back(std::move(t));
  }
  return out;
}

SyntheticSpec SyntheticSpec::from_config(const std::map<std::string, std::string>& kv) {
  SyntheticSpec s;
  auto get = [&](const char* key, double& out) {
    auto it = kv.find(key);
    if (it != kv.end()) out = std::stod(it->second);
  };
  auto geti = [&](const char* key, int& out) {
    auto it = kv.find(key);
    if (it != kv.end()) out = std::stoi(it->second);
  };
  geti("frames", s.frames);
  get("length", s.length);
  get("width", s.width);
  get("height", s.height);
  geti("points_on_target", s.points_on_target);
  geti("clutter_points", s.clutter_points);
  get("noise_sigma", s.noise_sigma);
  get("step_translation", s.step_translation);
  get("step_rotation", s.step_rotation);
  get("clutter_margin", s.clutter_margin);
  get("start_heading_range", s.start_heading_range);
  return s;
}

std::map<std::string, std::string> SyntheticSpec::to_config() const {
  std::map<std::string, std::string> kv;
  auto put = [&](const char* key, double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    kv[key] = os.str();
  };
  kv["frames"] = std::to_string(frames);
  put("length", length);
  put("width", width);
  put("height", height);
  kv["points_on_target"] = std::to_string(points_on_target);
  kv["clutter_points"] = std::to_string(clutter_points);
  put("noise_sigma", noise_sigma);
  put("step_translation", step_translation);
  put("step_rotation", step_rotation);
  put("clutter_margin", clutter_margin);
  put("start_heading_range", start_heading_range);
  return kv;
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\n");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r\n");
      return s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return SyntheticSpec::from_config(kv);
}

std::string synthetic_spec_text(const SyntheticSpec& spec) {
  std::ostringstream os;
  for (const auto& [k, v] : spec.to_config()) os << k << " = " << v << "\n";
  return os.str();
}

}  // namespace p2b::dataio
