#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swformer/sparse_bev.hpp"

namespace swformer {

struct WindowConfig {
  int height = 10;
  int width = 10;
  int max_buckets = 6;

  // ceil(H*W / 2^i) for i = 0..max_buckets-1, stopping before a capacity
  // would fall under 4. Strictly decreasing.
  std::vector<int> capacities() const;
  void validate() const;
};

// Coordinate offset applied before partitioning.
struct ShiftSpec {
  int row = 0;
  int col = 0;
  static ShiftSpec half(const WindowConfig& cfg) { return {cfg.height / 2, cfg.width / 2}; }
};

// Windows sharing one padded sequence length. Slot arrays are
// [num_windows * capacity], row-major by voxel coordinate within a window.
struct WindowBucket {
  int capacity = 0;
  std::vector<Coord> windows;
  std::vector<std::int64_t> slot_source;  // index into the partitioned SparseBEV, -1 for padding
  std::vector<std::uint8_t> valid;
  std::vector<Coord> slot_coord;  // shifted voxel coordinate of each valid slot

  std::size_t num_windows() const { return windows.size(); }
};

struct BucketedWindowSet {
  WindowConfig config;
  ShiftSpec shift;
  std::vector<WindowBucket> buckets;  // one per capacity, possibly empty

  std::size_t num_windows() const;
  std::size_t num_slots_used() const;
};

BucketedWindowSet window_partition(std::span<const Coord> coords, const WindowConfig& cfg,
                                   ShiftSpec shift = {});
BucketedWindowSet window_partition(const SparseBEV& bev, const WindowConfig& cfg);
// Partition of coordinates offset by `shift`; source indices still refer to
// the unshifted input.
BucketedWindowSet shifted_partition(const SparseBEV& bev, const WindowConfig& cfg, ShiftSpec shift);

// Padded [num_windows, capacity, channels] features of one bucket; padded
// slots are zero.
Tensor gather_bucket(const Tensor& features, const WindowBucket& bucket);

// One line per window: bucket,window_row,window_col,n_valid
std::string dump_windows(const BucketedWindowSet& set);

struct StridedSelection {
  std::vector<Coord> coords;            // coarse coordinates, sorted
  std::vector<std::int64_t> source;     // selected fine voxel per coarse voxel
};

// Per factor x factor cell, the occupied voxel nearest to the cell center
// (squared Euclidean distance on voxel centers; ties go to the smallest
// row-major coordinate).
StridedSelection strided_select(std::span<const Coord> coords, int factor);
SparseBEV strided_partition(const SparseBEV& bev, int factor);

// Copies each coarse feature onto the fine template's occupied voxels; a fine
// voxel whose parent is empty receives zeros.
SparseBEV sparse_upsample(const SparseBEV& coarse, const SparseBEV& fine_template);

DenseGrid scatter_to_dense(const SparseBEV& bev, double fill = 0.0);
// Inverse of scatter for the given coordinates, [coords, channels] row-major.
std::vector<double> gather_from_dense(const DenseGrid& grid, std::span<const Coord> coords);

// Same-size k x k sliding max per channel; cells beyond the border count as
// `fill`. k must be odd.
DenseGrid dense_max_pool(const DenseGrid& grid, int k, double fill = 0.0);

}  // namespace swformer
