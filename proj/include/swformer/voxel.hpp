#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swformer/geometry.hpp"
#include "swformer/params.hpp"
#include "swformer/sparse_bev.hpp"

namespace swformer {

struct Point {
  double x = 0, y = 0, z = 0;
  double intensity = 0;
  double elongation = 0;
  double time_offset = 0;  // seconds relative to the newest frame
};

// Axis-aligned BEV region covered by the voxel grid.
struct Extent {
  double x_min = 0, y_min = 0, x_max = 40.96, y_max = 40.96;
};

struct PointCloudScene {
  // Frames ordered oldest to newest; the newest has time offset 0.
  std::vector<std::vector<Point>> frames;
  std::vector<double> frame_times;
  Extent extent;
  std::vector<LabeledBox> boxes;

  std::vector<Point> all_points() const;
  std::size_t num_points() const;
};

// Grid layout: row indexes y, col indexes x, origin at the extent's minimum.
struct VoxelGrid {
  Extent extent;
  double voxel_size = 0.32;

  GridShape shape() const;
  // Center of voxel (row, col) at the given stride, in meters.
  double center_x(int col, int stride = 1) const { return extent.x_min + (col + 0.5) * voxel_size * stride; }
  double center_y(int row, int stride = 1) const { return extent.y_min + (row + 0.5) * voxel_size * stride; }
};

struct VoxelAssignment {
  VoxelGrid grid;
  std::vector<std::int64_t> point_voxel;            // per input point, -1 when dropped
  std::vector<Coord> voxels;                        // sorted row-major
  std::vector<std::vector<std::size_t>> voxel_points;  // parallel to voxels
  std::size_t dropped = 0;
};

// tanh of intensity and elongation; coordinates untouched.
Point normalize_point_features(const Point& p);

// Dynamic voxelization in x/y only; z never partitions. Points outside the
// extent (or non-finite) are dropped and counted.
VoxelAssignment dynamic_voxelize(const std::vector<Point>& points, const VoxelGrid& grid);

struct EmbedParams {
  Tensor w1, b1, ln1_gain, ln1_bias;
  Tensor w2, b2, ln2_gain, ln2_bias;
};

constexpr std::size_t kPointFeatureDim = 6;

EmbedParams make_embed_params(ParamStore& store, const std::string& prefix, std::size_t channels, Rng& rng);

struct EmbedOptions {
  // Feed absolute x/y instead of offsets to the voxel center.
  bool absolute_coords = false;
};

// Per-point [dx, dy, z, tanh(intensity), tanh(elongation), time offset]
// through two (linear, layer norm, GELU) layers, max-pooled per voxel.
SparseBEV embed_and_pool(const VoxelAssignment& assign, const std::vector<Point>& points, const EmbedParams& params,
                         const EmbedOptions& options = {});

}  // namespace swformer
