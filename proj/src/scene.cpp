#include "swformer/scene.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "swformer/error.hpp"

namespace swformer {

void SceneSpec::validate() const {
  require(extent.x_max > extent.x_min && extent.y_max > extent.y_min, "scene extent must be non-empty");
  require(0 <= vehicles_min && vehicles_min <= vehicles_max, "vehicle count range is invalid");
  require(0 <= pedestrians_min && pedestrians_min <= pedestrians_max, "pedestrian count range is invalid");
  require(5 <= points_per_box_min && points_per_box_min <= points_per_box_max, "points per box must be at least 5");
  require(clutter_points >= 0 && frames >= 1 && max_retries >= 1, "invalid clutter, frame or retry count");
}

namespace {

Box3D random_box(ObjectClass cls, const SceneSpec& spec, Rng& rng) {
  Box3D b;
  if (cls == ObjectClass::kVehicle) {
    b.l = rng.uniform(3.8, 5.2);
    b.w = rng.uniform(1.7, 2.2);
    b.h = rng.uniform(1.4, 1.9);
  } else {
    b.l = rng.uniform(0.6, 1.0);
    b.w = rng.uniform(0.6, 1.0);
    b.h = rng.uniform(1.6, 1.9);
  }
  b.heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const double reach = 0.5 * std::hypot(b.l, b.w) + spec.margin;
  b.x = rng.uniform(spec.extent.x_min + reach, spec.extent.x_max - reach);
  b.y = rng.uniform(spec.extent.y_min + reach, spec.extent.y_max - reach);
  b.z = 0.5 * b.h;
  return b;
}

bool separated(const Box3D& a, const Box3D& b) {
  // Bounding circles with a small gap; conservative but simple.
  return std::hypot(a.x - b.x, a.y - b.y) > 0.5 * (std::hypot(a.l, a.w) + std::hypot(b.l, b.w)) + 0.3;
}

Point surface_point(const Box3D& b, Rng& rng) {
  const double inset = 0.98;
  const double top = b.l * b.w, long_side = b.l * b.h, short_side = b.w * b.h;
  const double pick = rng.uniform(0.0, top + 2 * long_side + 2 * short_side);
  double lx, ly, lz;
  if (pick < top) {
    lx = rng.uniform(-0.5, 0.5) * b.l;
    ly = rng.uniform(-0.5, 0.5) * b.w;
    lz = 0.5 * b.h;
  } else if (pick < top + 2 * long_side) {
    lx = rng.uniform(-0.5, 0.5) * b.l;
    ly = (pick < top + long_side ? 0.5 : -0.5) * b.w;
    lz = rng.uniform(-0.5, 0.5) * b.h;
  } else {
    lx = (pick < top + 2 * long_side + short_side ? 0.5 : -0.5) * b.l;
    ly = rng.uniform(-0.5, 0.5) * b.w;
    lz = rng.uniform(-0.5, 0.5) * b.h;
  }
  lx *= inset;
  ly *= inset;
  lz *= inset;
  const double c = std::cos(b.heading), s = std::sin(b.heading);
  return {b.x + c * lx - s * ly, b.y + s * lx + c * ly, b.z + lz, rng.uniform(0.2, 1.0), rng.uniform(0.0, 0.5), 0.0};
}

}  // namespace

PointCloudScene gen_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  PointCloudScene scene;
  scene.extent = spec.extent;
  const auto nv = rng.uniform_int(spec.vehicles_min, spec.vehicles_max);
  const auto np = rng.uniform_int(spec.pedestrians_min, spec.pedestrians_max);
  std::vector<ObjectClass> wanted(static_cast<std::size_t>(nv), ObjectClass::kVehicle);
  wanted.insert(wanted.end(), static_cast<std::size_t>(np), ObjectClass::kPedestrian);
  for (auto cls : wanted) {
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_retries && !placed; ++attempt) {
      const Box3D b = random_box(cls, spec, rng);
      if (std::all_of(scene.boxes.begin(), scene.boxes.end(), [&](const LabeledBox& o) { return separated(b, o.box); })) {
        scene.boxes.push_back({b, cls});
        placed = true;
      }
    }
    if (!placed) throw ContractError("gen_scene: could not place " + class_name(cls) + " without overlap");
  }
  for (int f = 0; f < spec.frames; ++f) {
    const double t = -spec.frame_interval * (spec.frames - 1 - f);
    std::vector<Point> frame;
    for (const auto& lb : scene.boxes) {
      const auto n = rng.uniform_int(spec.points_per_box_min, spec.points_per_box_max);
      for (std::int64_t i = 0; i < n; ++i) {
        Point p = surface_point(lb.box, rng);
        p.time_offset = t;
        frame.push_back(p);
      }
    }
    for (int i = 0; i < spec.clutter_points; ++i) {
      const Point p{rng.uniform(spec.extent.x_min, spec.extent.x_max), rng.uniform(spec.extent.y_min, spec.extent.y_max),
                    rng.uniform(0.0, 0.15), rng.uniform(0.0, 0.3), rng.uniform(0.0, 0.2), t};
      const bool inside = std::any_of(scene.boxes.begin(), scene.boxes.end(),
                                      [&](const LabeledBox& lb) { return contains_bev(lb.box, p.x, p.y); });
      if (!inside) frame.push_back(p);
    }
    scene.frames.push_back(std::move(frame));
    scene.frame_times.push_back(t);
  }
  return scene;
}

void AugmentConfig::validate() const {
  for (double p : {rotate_prob, flip_prob, scale_prob, drop_prob}) {
    require(p >= 0.0 && p <= 1.0, "augmentation probabilities must lie in [0, 1]");
  }
  require(scale_min > 0 && scale_min <= scale_max, "scale range is invalid");
}

namespace {

template <typename PointFn, typename BoxFn>
PointCloudScene transform(const PointCloudScene& scene, PointFn&& on_point, BoxFn&& on_box) {
  PointCloudScene out = scene;
  for (auto& frame : out.frames)
    for (auto& p : frame) on_point(p);
  for (auto& lb : out.boxes) on_box(lb.box);
  return out;
}

}  // namespace

PointCloudScene rotate_scene(const PointCloudScene& scene, double yaw) {
  const double cx = 0.5 * (scene.extent.x_min + scene.extent.x_max);
  const double cy = 0.5 * (scene.extent.y_min + scene.extent.y_max);
  const double c = std::cos(yaw), s = std::sin(yaw);
  auto turn = [&](double& x, double& y) {
    const double dx = x - cx, dy = y - cy;
    x = cx + c * dx - s * dy;
    y = cy + s * dx + c * dy;
  };
  return transform(
      scene, [&](Point& p) { turn(p.x, p.y); },
      [&](Box3D& b) {
        turn(b.x, b.y);
        b.heading = wrap_angle(b.heading + yaw);
      });
}

PointCloudScene flip_scene(const PointCloudScene& scene) {
  const double cy2 = scene.extent.y_min + scene.extent.y_max;
  return transform(
      scene, [&](Point& p) { p.y = cy2 - p.y; },
      [&](Box3D& b) {
        b.y = cy2 - b.y;
        b.heading = wrap_angle(-b.heading);
      });
}

PointCloudScene scale_scene(const PointCloudScene& scene, double factor) {
  const double cx = 0.5 * (scene.extent.x_min + scene.extent.x_max);
  const double cy = 0.5 * (scene.extent.y_min + scene.extent.y_max);
  auto grow = [&](double& x, double& y, double& z) {
    x = cx + (x - cx) * factor;
    y = cy + (y - cy) * factor;
    z *= factor;
  };
  return transform(
      scene, [&](Point& p) { grow(p.x, p.y, p.z); },
      [&](Box3D& b) {
        grow(b.x, b.y, b.z);
        b.l *= factor;
        b.w *= factor;
        b.h *= factor;
      });
}

PointCloudScene augment(const PointCloudScene& scene, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  // Every draw happens unconditionally so the random stream does not depend
  // on which transforms fire.
  const bool rotate = rng.bernoulli(cfg.rotate_prob);
  const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const bool flip = rng.bernoulli(cfg.flip_prob);
  const bool rescale = rng.bernoulli(cfg.scale_prob);
  const double factor = rng.uniform(cfg.scale_min, cfg.scale_max);
  PointCloudScene out = scene;
  if (rotate) out = rotate_scene(out, yaw);
  if (flip) out = flip_scene(out);
  if (rescale && factor != 1.0) out = scale_scene(out, factor);
  for (auto& frame : out.frames) {
    std::vector<Point> kept;
    kept.reserve(frame.size());
    for (const auto& p : frame)
      if (!rng.bernoulli(cfg.drop_prob)) kept.push_back(p);
    frame = std::move(kept);
  }
  return out;
}

std::string format_number(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_number(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ContractError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

bool skip_line(const std::string& line) { return line.empty() || line[0] == '#'; }

}  // namespace

void write_points(std::ostream& os, const PointCloudScene& scene) {
  os << "frames," << scene.frames.size();
  for (double t : scene.frame_times) os << ',' << format_number(t);
  os << '\n';
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    for (const auto& p : scene.frames[f]) {
      os << format_number(p.x) << ',' << format_number(p.y) << ',' << format_number(p.z) << ','
         << format_number(p.intensity) << ',' << format_number(p.elongation) << ',' << f << '\n';
    }
  }
}

void write_boxes(std::ostream& os, const std::vector<LabeledBox>& boxes) {
  for (const auto& lb : boxes) {
    const Box3D& b = lb.box;
    os << format_number(b.x) << ',' << format_number(b.y) << ',' << format_number(b.z) << ',' << format_number(b.l)
       << ',' << format_number(b.w) << ',' << format_number(b.h) << ',' << format_number(b.heading) << ','
       << class_name(lb.cls) << '\n';
  }
}

void write_detections(std::ostream& os, const std::vector<Detection>& dets) {
  for (const auto& d : dets) {
    const Box3D& b = d.box;
    os << class_name(d.cls) << ',' << format_number(d.score) << ',' << format_number(b.x) << ','
       << format_number(b.y) << ',' << format_number(b.z) << ',' << format_number(b.l) << ',' << format_number(b.w)
       << ',' << format_number(b.h) << ',' << format_number(b.heading) << '\n';
  }
}

void read_points(std::istream& is, PointCloudScene& scene) {
  std::string line;
  std::size_t line_no = 0;
  scene.frames.clear();
  scene.frame_times.clear();
  while (std::getline(is, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto cells = split_csv(line);
    if (scene.frames.empty()) {
      if (cells.size() < 2 || cells[0] != "frames") throw ContractError("points file must start with a frames header");
      const auto n = static_cast<std::size_t>(parse_number(cells[1], line_no));
      if (n == 0 || cells.size() != 2 + n) throw ContractError("frames header lists the wrong number of times");
      scene.frames.resize(n);
      for (std::size_t i = 0; i < n; ++i) scene.frame_times.push_back(parse_number(cells[2 + i], line_no));
      continue;
    }
    if (cells.size() != 6) throw ContractError("line " + std::to_string(line_no) + ": expected 6 point fields");
    const auto f = static_cast<std::size_t>(parse_number(cells[5], line_no));
    if (f >= scene.frames.size()) throw ContractError("line " + std::to_string(line_no) + ": frame index out of range");
    scene.frames[f].push_back({parse_number(cells[0], line_no), parse_number(cells[1], line_no),
                               parse_number(cells[2], line_no), parse_number(cells[3], line_no),
                               parse_number(cells[4], line_no), scene.frame_times[f]});
  }
  if (scene.frames.empty()) throw ContractError("points file has no frames header");
}

std::vector<LabeledBox> read_boxes(std::istream& is) {
  std::vector<LabeledBox> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 8) throw ContractError("line " + std::to_string(line_no) + ": expected 8 box fields");
    LabeledBox lb;
    lb.box = {parse_number(cells[0], line_no), parse_number(cells[1], line_no), parse_number(cells[2], line_no),
              parse_number(cells[3], line_no), parse_number(cells[4], line_no), parse_number(cells[5], line_no),
              parse_number(cells[6], line_no)};
    if (!(lb.box.l > 0 && lb.box.w > 0 && lb.box.h > 0)) {
      throw ContractError("line " + std::to_string(line_no) + ": box extents must be positive");
    }
    lb.cls = parse_class(cells[7]);
    out.push_back(lb);
  }
  return out;
}

std::vector<Detection> read_detections(std::istream& is) {
  std::vector<Detection> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (skip_line(line)) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 9) throw ContractError("line " + std::to_string(line_no) + ": expected 9 detection fields");
    Detection d;
    d.cls = parse_class(cells[0]);
    d.score = parse_number(cells[1], line_no);
    d.box = {parse_number(cells[2], line_no), parse_number(cells[3], line_no), parse_number(cells[4], line_no),
             parse_number(cells[5], line_no), parse_number(cells[6], line_no), parse_number(cells[7], line_no),
             parse_number(cells[8], line_no)};
    out.push_back(d);
  }
  return out;
}

namespace {

std::filesystem::path scene_file(const std::filesystem::path& dir, std::size_t i, const char* kind) {
  char name[64];
  std::snprintf(name, sizeof name, "scene_%03zu.%s.csv", i, kind);
  return dir / name;
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const std::vector<PointCloudScene>& scenes) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::ofstream points(scene_file(dir, i, "points"));
    std::ofstream boxes(scene_file(dir, i, "boxes"));
    if (!points || !boxes) throw ContractError("cannot write dataset files in " + dir.string());
    write_points(points, scenes[i]);
    write_boxes(boxes, scenes[i].boxes);
  }
}

std::vector<PointCloudScene> load_dataset(const std::filesystem::path& dir, const Extent& extent) {
  std::vector<PointCloudScene> scenes;
  for (std::size_t i = 0;; ++i) {
    const auto pp = scene_file(dir, i, "points");
    if (!std::filesystem::exists(pp)) break;
    PointCloudScene scene;
    scene.extent = extent;
    std::ifstream points(pp);
    read_points(points, scene);
    std::ifstream boxes(scene_file(dir, i, "boxes"));
    if (boxes) scene.boxes = read_boxes(boxes);
    scenes.push_back(std::move(scene));
  }
  if (scenes.empty()) throw ContractError("no scene files found in " + dir.string());
  return scenes;
}

}  // namespace swformer
