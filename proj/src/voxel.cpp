#include "swformer/voxel.hpp"

#include <cmath>
#include <map>

#include "swformer/error.hpp"
#include "swformer/ops.hpp"

namespace swformer {

std::vector<Point> PointCloudScene::all_points() const {
  std::vector<Point> out;
  out.reserve(num_points());
  for (const auto& f : frames) out.insert(out.end(), f.begin(), f.end());
  return out;
}

std::size_t PointCloudScene::num_points() const {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.size();
  return n;
}

GridShape VoxelGrid::shape() const {
  const auto cells = [&](double span) { return static_cast<int>(std::ceil(span / voxel_size - 1e-9)); };
  return {cells(extent.y_max - extent.y_min), cells(extent.x_max - extent.x_min)};
}

Point normalize_point_features(const Point& p) {
  Point out = p;
  out.intensity = std::tanh(p.intensity);
  out.elongation = std::tanh(p.elongation);
  return out;
}

VoxelAssignment dynamic_voxelize(const std::vector<Point>& points, const VoxelGrid& grid) {
  require(grid.voxel_size > 0, "voxel size must be positive");
  VoxelAssignment out;
  out.grid = grid;
  out.point_voxel.assign(points.size(), -1);
  const GridShape shape = grid.shape();
  std::map<Coord, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& p = points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      ++out.dropped;
      continue;
    }
    const double fc = std::floor((p.x - grid.extent.x_min) / grid.voxel_size);
    const double fr = std::floor((p.y - grid.extent.y_min) / grid.voxel_size);
    if (fr < 0 || fc < 0 || fr >= shape.rows || fc >= shape.cols) {
      ++out.dropped;
      continue;
    }
    cells[{static_cast<std::int32_t>(fr), static_cast<std::int32_t>(fc)}].push_back(i);
  }
  for (auto& [coord, members] : cells) {
    for (auto m : members) out.point_voxel[m] = static_cast<std::int64_t>(out.voxels.size());
    out.voxels.push_back(coord);
    out.voxel_points.push_back(std::move(members));
  }
  return out;
}

EmbedParams make_embed_params(ParamStore& store, const std::string& prefix, std::size_t channels, Rng& rng) {
  EmbedParams p;
  p.w1 = store.add_weight(prefix + ".l1.weight", kPointFeatureDim, channels, rng);
  p.b1 = store.add_constant(prefix + ".l1.bias", {channels}, 0.0);
  p.ln1_gain = store.add_constant(prefix + ".l1.ln_gain", {channels}, 1.0);
  p.ln1_bias = store.add_constant(prefix + ".l1.ln_bias", {channels}, 0.0);
  p.w2 = store.add_weight(prefix + ".l2.weight", channels, channels, rng);
  p.b2 = store.add_constant(prefix + ".l2.bias", {channels}, 0.0);
  p.ln2_gain = store.add_constant(prefix + ".l2.ln_gain", {channels}, 1.0);
  p.ln2_bias = store.add_constant(prefix + ".l2.ln_bias", {channels}, 0.0);
  return p;
}

SparseBEV embed_and_pool(const VoxelAssignment& assign, const std::vector<Point>& points, const EmbedParams& params,
                         const EmbedOptions& options) {
  const std::size_t channels = params.w2.dim(1);
  SparseBEV out;
  out.grid = assign.grid.shape();
  out.stride = 1;
  if (assign.voxels.empty()) {
    out.features = Tensor::zeros({0, channels});
    return out;
  }
  // Rows follow voxel order so that group members are contiguous.
  std::vector<double> input;
  std::vector<std::size_t> offsets{0};
  std::vector<std::int64_t> members;
  for (std::size_t v = 0; v < assign.voxels.size(); ++v) {
    const Coord c = assign.voxels[v];
    const double cx = assign.grid.center_x(c.col), cy = assign.grid.center_y(c.row);
    for (auto idx : assign.voxel_points[v]) {
      const Point p = normalize_point_features(points.at(idx));
      members.push_back(static_cast<std::int64_t>(members.size()));
      if (options.absolute_coords) {
        input.insert(input.end(), {p.x, p.y, p.z, p.intensity, p.elongation, p.time_offset});
      } else {
        input.insert(input.end(), {p.x - cx, p.y - cy, p.z, p.intensity, p.elongation, p.time_offset});
      }
    }
    offsets.push_back(members.size());
  }
  Tensor x({members.size(), kPointFeatureDim}, std::move(input));
  Tensor h = gelu(layer_norm(linear(x, params.w1, params.b1), params.ln1_gain, params.ln1_bias));
  h = gelu(layer_norm(linear(h, params.w2, params.b2), params.ln2_gain, params.ln2_bias));
  out.coords = assign.voxels;
  out.features = group_max(h, offsets, members);
  return out;
}

}  // namespace swformer
