#pragma once

#include <vector>

#include "swformer/head.hpp"
#include "swformer/voxel.hpp"

namespace swformer {

// Boxes of `cls` holding at least `min_points` scene points.
std::vector<Box3D> training_boxes(const PointCloudScene& scene, ObjectClass cls, std::size_t min_points);

// CenterNet radius (in cells) for a box of `length` x `width` cells such that
// a corner-shifted box keeps IoU >= min_overlap.
double gaussian_radius(double length, double width, double min_overlap);

struct ClassTargets {
  std::vector<double> heatmap;          // per voxel, in [0, 1]
  std::vector<std::uint8_t> foreground;  // voxel center inside some box
  std::vector<std::uint8_t> active;      // regression gate after the cap
  std::vector<Box3D> box;               // offsets dx, dy, dz from the voxel center; sizes and heading absolute
  std::size_t num_boxes = 0;

  std::size_t num_active() const;
};

// Targets for one class on the voxels of `occupancy`. Each box splats a
// Gaussian with sigma = max(radius / 3, 1) cells, peaked at the cell holding
// its center; a voxel takes the maximum over boxes and regresses toward the
// box that produced it.
ClassTargets assign_targets(const std::vector<Box3D>& boxes, const SparseBEV& occupancy, const VoxelGrid& grid,
                            ObjectClass cls, const HeadConfig& cfg);

}  // namespace swformer
