#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "swformer/decode.hpp"
#include "swformer/voxel.hpp"

namespace swformer {

struct SceneSpec {
  Extent extent;
  int vehicles_min = 2, vehicles_max = 4;
  int pedestrians_min = 0, pedestrians_max = 3;
  int points_per_box_min = 40, points_per_box_max = 120;
  int clutter_points = 300;  // ground returns outside every box
  int frames = 1;
  double frame_interval = 0.1;  // seconds between frames
  double margin = 1.0;          // keep box footprints this far inside the extent
  int max_retries = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

// Non-overlapping boxes resting on the ground, points sampled on their top and
// side faces (slightly inset so every point is interior) plus ground clutter.
// Throws ContractError when the boxes cannot be placed within max_retries.
PointCloudScene gen_scene(const SceneSpec& spec);

struct AugmentConfig {
  double rotate_prob = 0.74;  // yaw ~ U[-pi, pi)
  double flip_prob = 0.5;     // mirror y about the extent center
  double scale_prob = 1.0;
  double scale_min = 0.95, scale_max = 1.05;
  double drop_prob = 0.05;

  void validate() const;
};

// Rotations and scaling pivot on the extent center (scaling also multiplies z).
PointCloudScene rotate_scene(const PointCloudScene& scene, double yaw);
PointCloudScene flip_scene(const PointCloudScene& scene);
PointCloudScene scale_scene(const PointCloudScene& scene, double factor);
PointCloudScene augment(const PointCloudScene& scene, const AugmentConfig& cfg, Rng& rng);

// Text formats. Points: header "frames,<n>,<t_0>,...,<t_n-1>" then one
// "x,y,z,intensity,elongation,frame_index" line per point. Boxes:
// "cx,cy,cz,l,w,h,heading,class". Detections:
// "class,score,cx,cy,cz,l,w,h,heading". Numbers use round-trip precision.
void write_points(std::ostream& os, const PointCloudScene& scene);
void write_boxes(std::ostream& os, const std::vector<LabeledBox>& boxes);
void write_detections(std::ostream& os, const std::vector<Detection>& dets);
void read_points(std::istream& is, PointCloudScene& scene);
std::vector<LabeledBox> read_boxes(std::istream& is);
std::vector<Detection> read_detections(std::istream& is);

// A dataset directory holds scene_NNN.points.csv / scene_NNN.boxes.csv pairs.
void save_dataset(const std::filesystem::path& dir, const std::vector<PointCloudScene>& scenes);
std::vector<PointCloudScene> load_dataset(const std::filesystem::path& dir, const Extent& extent);

std::string format_number(double v);

}  // namespace swformer
