#pragma once

#include <span>
#include <vector>

#include "swformer/head.hpp"
#include "swformer/voxel.hpp"

namespace swformer {

struct Detection {
  ObjectClass cls = ObjectClass::kVehicle;
  double score = 0;
  Box3D box;  // world frame
};

// Indices of voxels with heat >= threshold that dominate their occupied 3x3
// neighborhood: at least every later neighbor (row-major) and strictly above
// every earlier one, so a plateau is owned by its first voxel.
std::vector<std::size_t> local_maxima(std::span<const Coord> coords, GridShape grid, std::span<const double> heat,
                                      double threshold);

// One detection per local maximum, sorted by descending score.
std::vector<Detection> decode(const SparseBEV& feat, const HeadOutput& out, const VoxelGrid& grid, ObjectClass cls,
                              const HeadConfig& cfg);

}  // namespace swformer
