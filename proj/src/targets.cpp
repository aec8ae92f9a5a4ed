#include "swformer/targets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "swformer/error.hpp"

namespace swformer {

std::vector<Box3D> training_boxes(const PointCloudScene& scene, ObjectClass cls, std::size_t min_points) {
  const auto points = scene.all_points();
  std::vector<Box3D> out;
  for (const auto& lb : scene.boxes) {
    if (lb.cls != cls) continue;
    std::size_t inside = 0;
    for (const auto& p : points) inside += contains(lb.box, p.x, p.y, p.z);
    if (inside >= min_points) out.push_back(lb.box);
  }
  return out;
}

double gaussian_radius(double length, double width, double min_overlap) {
  const double h = length, w = width;
  const double b1 = h + w, c1 = w * h * (1 - min_overlap) / (1 + min_overlap);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4 * c1)) / 2;
  const double b2 = 2 * (h + w), c2 = (1 - min_overlap) * w * h;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 16 * c2)) / 2;
  const double a3 = 4 * min_overlap, b3 = -2 * min_overlap * (h + w), c3 = (min_overlap - 1) * w * h;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4 * a3 * c3)) / 2;
  return std::min({r1, r2, r3});
}

std::size_t ClassTargets::num_active() const { return static_cast<std::size_t>(std::count(active.begin(), active.end(), 1)); }

ClassTargets assign_targets(const std::vector<Box3D>& boxes, const SparseBEV& occupancy, const VoxelGrid& grid,
                            ObjectClass cls, const HeadConfig& cfg) {
  const std::size_t n = occupancy.size();
  const double cell = grid.voxel_size * occupancy.stride;
  ClassTargets t;
  t.heatmap.assign(n, 0.0);
  t.foreground.assign(n, 0);
  t.active.assign(n, 0);
  t.box.assign(n, Box3D{});
  t.num_boxes = boxes.size();
  std::vector<std::ptrdiff_t> owner(n, -1);
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const Box3D& box = boxes[b];
    const double cr = std::floor((box.y - grid.extent.y_min) / cell);
    const double cc = std::floor((box.x - grid.extent.x_min) / cell);
    const double sigma = std::max(gaussian_radius(box.l / cell, box.w / cell, cfg.min_overlap) / 3.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const Coord c = occupancy.coords[i];
      const double x = grid.center_x(c.col, occupancy.stride), y = grid.center_y(c.row, occupancy.stride);
      if (contains_bev(box, x, y)) t.foreground[i] = 1;
      const double dr = c.row - cr, dc = c.col - cc;
      const double h = std::exp(-(dr * dr + dc * dc) / (2 * sigma * sigma));
      if (h > t.heatmap[i]) {
        t.heatmap[i] = h;
        owner[i] = static_cast<std::ptrdiff_t>(b);
      }
    }
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (owner[i] >= 0 && t.heatmap[i] > cfg.delta1) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return t.heatmap[a] > t.heatmap[b]; });
  if (order.size() > cfg.target_cap[static_cast<int>(cls)]) order.resize(cfg.target_cap[static_cast<int>(cls)]);
  for (auto i : order) {
    const Box3D& box = boxes[static_cast<std::size_t>(owner[i])];
    const Coord c = occupancy.coords[i];
    t.active[i] = 1;
    t.box[i] = {box.x - grid.center_x(c.col, occupancy.stride), box.y - grid.center_y(c.row, occupancy.stride), box.z,
                box.l, box.w, box.h, wrap_angle(box.heading)};
  }
  return t;
}

}  // namespace swformer
