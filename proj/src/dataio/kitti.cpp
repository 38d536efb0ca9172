#include "p2b/dataio/kitti.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace p2b::dataio {

namespace {

bool tracked_category(const std::string& type) {
  return type == "Car" || type == "Pedestrian" || type == "Van" || type == "Cyclist";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::string read_binary_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

std::vector<TrackletLabels> parse_kitti_labels(const std::string& text,
                                               const std::string& scene) {
  std::map<int, TrackletLabels> tracks;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ls(line);
    int frame, track_id;
    std::string type;
    double truncated, occluded, alpha, b1, b2, b3, b4, h, w, l, x, y, z, ry;
    if (!(ls >> frame >> track_id >> type >> truncated >> occluded >> alpha >> b1 >> b2 >> b3 >>
          b4 >> h >> w >> l >> x >> y >> z >> ry))
      throw DataError("label parse error at line " + std::to_string(line_no) + " of scene " +
                      scene);
    if (type == "DontCare" || !tracked_category(type)) continue;
    TrackletLabels& t = tracks[track_id];
    if (t.frames.empty()) {
      t.scene = scene;
      t.track_id = track_id;
      t.category = type;
    }
    t.frames.push_back(frame);
    t.boxes.push_back(box_from_kitti(h, w, l, x, y, z, ry));
  }
  std::vector<TrackletLabels> out;
  for (auto& [id, t] : tracks) {
    // stable order by frame index
    std::vector<std::size_t> order(t.frames.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return t.frames[a] < t.frames[b]; });
    TrackletLabels sorted = t;
    for (std::size_t i = 0; i < order.size(); ++i) {
      sorted.frames[i] = t.frames[order[i]];
      sorted.boxes[i] = t.boxes[order[i]];
    }
    out.push_back(std::move(sorted));
  }
  return out;
}

pcops::PointCloud load_velodyne_bin(const std::string& bytes) {
  if (bytes.size() % 16 != 0)
    throw DataError("velodyne payload of " + std::to_string(bytes.size()) +
                    " bytes is not a multiple of 16");
  pcops::PointCloud cloud;
  cloud.frame = pcops::Frame::Sensor;
  const std::size_t n = bytes.size() / 16;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    float v[4];
    std::memcpy(v, bytes.data() + i * 16, 16);
    cloud.points.push_back({v[0], v[1], v[2]});
  }
  return cloud;
}

std::string velodyne_bytes(const pcops::PointCloud& cloud) {
  std::string out(cloud.size() * 16, '\0');
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const float v[4] = {static_cast<float>(cloud.points[i].x),
                        static_cast<float>(cloud.points[i].y),
                        static_cast<float>(cloud.points[i].z), 0.0f};
    std::memcpy(out.data() + i * 16, v, 16);
  }
  return out;
}

Calib parse_calib(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  double rect[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  double tr[12] = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
  bool have_tr = false;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (!key.empty() && key.back() == ':') key.pop_back();
    if (key == "R_rect" || key == "R0_rect") {
      for (double& v : rect) ls >> v;
    } else if (key == "Tr_velo_cam" || key == "Tr_velo_to_cam") {
      for (double& v : tr) ls >> v;
      have_tr = true;
    }
  }
  Calib c;
  if (!have_tr) return c;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += rect[i * 3 + k] * tr[k * 4 + j];
      c.m[i * 4 + j] = s;
    }
  c.identity = false;
  return c;
}

pcops::Vec3 internal_from_cam(const pcops::Vec3& cam) { return {cam.z, -cam.x, -cam.y}; }

pcops::Vec3 cam_from_internal(const pcops::Vec3& p) { return {-p.y, -p.z, p.x}; }

pcops::Box3D box_from_kitti(double h, double w, double l, double x, double y, double z,
                            double ry) {
  // KITTI anchors the box at the bottom-face center; y points down.
  const pcops::Vec3 cam_center{x, y - h / 2.0, z};
  return pcops::make_box(internal_from_cam(cam_center), l, w, h, -ry - kPi / 2.0);
}

void box_to_kitti(const pcops::Box3D& box, double& h, double& w, double& l, double& x, double& y,
                  double& z, double& ry) {
  h = box.height;
  w = box.width;
  l = box.length;
  const pcops::Vec3 cam_center = cam_from_internal(box.center);
  x = cam_center.x;
  y = cam_center.y + h / 2.0;
  z = cam_center.z;
  ry = wrap_angle(-box.heading - kPi / 2.0);
}

std::vector<Tracklet> load_kitti_tracklets(const std::filesystem::path& root,
                                           const std::vector<std::string>& scenes,
                                           const std::string& category_filter,
                                           std::size_t min_frames) {
  std::vector<Tracklet> out;
  for (const std::string& scene : scenes) {
    const auto labels =
        parse_kitti_labels(read_text_file(root / "label_02" / (scene + ".txt")), scene);

    Calib calib;
    const auto calib_path = root / "calib" / (scene + ".txt");
    if (std::filesystem::exists(calib_path)) calib = parse_calib(read_text_file(calib_path));

    // load each needed frame once, in the internal frame
    std::set<int> needed;
    for (const auto& t : labels)
      for (int f : t.frames) needed.insert(f);
    std::map<int, std::shared_ptr<const pcops::PointCloud>> frames;
    for (int f : needed) {
      char name[32];
      std::snprintf(name, sizeof(name), "%06d.bin", f);
      const auto path = root / "velodyne" / scene / name;
      if (!std::filesystem::exists(path)) continue;  // tracklets referencing it are dropped
      pcops::PointCloud velo = load_velodyne_bin(read_binary_file(path));
      auto cloud = std::make_shared<pcops::PointCloud>();
      cloud->frame = pcops::Frame::Sensor;
      cloud->points.reserve(velo.size());
      for (const pcops::Vec3& p : velo.points)
        cloud->points.push_back(internal_from_cam(calib.apply(p)));
      frames.emplace(f, std::move(cloud));
    }

    for (const auto& labels_t : labels) {
      if (!category_filter.empty() && labels_t.category != category_filter) continue;
      Tracklet t;
      t.scene = scene;
      t.track_id = labels_t.track_id;
      t.category = labels_t.category;
      for (std::size_t i = 0; i < labels_t.frames.size(); ++i) {
        auto it = frames.find(labels_t.frames[i]);
        if (it == frames.end()) continue;
        t.frame_ids.push_back(labels_t.frames[i]);
        t.clouds.push_back(it->second);
        t.boxes.push_back(labels_t.boxes[i]);
      }
      if (t.size() >= min_frames) out.push_back(std::move(t));
    }
  }
  return out;
}

void write_kitti_dataset(const std::filesystem::path& root,
                         const std::vector<Tracklet>& tracklets) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "label_02");
  for (std::size_t idx = 0; idx < tracklets.size(); ++idx) {
    const Tracklet& t = tracklets[idx];
    char scene[16];
    std::snprintf(scene, sizeof(scene), "%04zu", idx);
    fs::create_directories(root / "velodyne" / scene);
    std::ofstream labels(root / "label_02" / (std::string(scene) + ".txt"));
    if (!labels) throw DataError("cannot write labels for scene " + std::string(scene));
    labels.precision(17);  // boxes must round-trip exactly through text
    for (std::size_t f = 0; f < t.size(); ++f) {
      double h, w, l, x, y, z, ry;
      box_to_kitti(t.boxes[f], h, w, l, x, y, z, ry);
      labels << t.frame_ids[f] << " " << t.track_id << " " << t.category
             << " 0 0 0 0 0 50 50 " << h << " " << w << " " << l << " " << x << " " << y << " "
             << z << " " << ry << "\n";

      // synthetic scenes carry no calib; point files hold camera-frame coords
      pcops::PointCloud cam;
      cam.points.reserve(t.clouds[f]->size());
      for (const pcops::Vec3& p : t.clouds[f]->points) cam.points.push_back(cam_from_internal(p));
      char name[32];
      std::snprintf(name, sizeof(name), "%06d.bin", t.frame_ids[f]);
      std::ofstream bin(root / "velodyne" / scene / name, std::ios::binary);
      const std::string bytes = velodyne_bytes(cam);
      bin.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!bin) throw DataError("cannot write velodyne frame " + std::string(name));
    }
  }
}

std::vector<std::string> read_split_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open split file " + path.string());
  std::vector<std::string> scenes;
  std::string line;
  while (std::getline(f, line)) {
    const auto begin = line.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r\n");
    scenes.push_back(line.substr(begin, end - begin + 1));
  }
  return scenes;
}

}  // namespace p2b::dataio
