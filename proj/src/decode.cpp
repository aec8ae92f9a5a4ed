#include "swformer/decode.hpp"

#include <algorithm>

#include "swformer/error.hpp"

namespace swformer {

std::vector<std::size_t> local_maxima(std::span<const Coord> coords, GridShape grid, std::span<const double> heat,
                                      double threshold) {
  if (coords.size() != heat.size()) throw DimensionError("local_maxima: one heat value per voxel required");
  std::vector<std::ptrdiff_t> index(std::size_t(grid.rows) * grid.cols, -1);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (!grid.contains(coords[i])) throw ContractError("local_maxima: coordinate outside grid");
    if (heat[i] >= threshold) index[std::size_t(coords[i].row) * grid.cols + coords[i].col] = std::ptrdiff_t(i);
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (!(heat[i] >= threshold)) continue;
    const Coord c = coords[i];
    bool keep = true;
    for (int dr = -1; dr <= 1 && keep; ++dr) {
      for (int dc = -1; dc <= 1 && keep; ++dc) {
        const Coord n{c.row + dr, c.col + dc};
        if ((dr == 0 && dc == 0) || !grid.contains(n)) continue;
        const auto j = index[std::size_t(n.row) * grid.cols + n.col];
        if (j < 0) continue;
        const double other = heat[static_cast<std::size_t>(j)];
        keep = n < c ? heat[i] > other : heat[i] >= other;
      }
    }
    if (keep) out.push_back(i);
  }
  return out;
}

std::vector<Detection> decode(const SparseBEV& feat, const HeadOutput& out, const VoxelGrid& grid, ObjectClass cls,
                              const HeadConfig& cfg) {
  const std::size_t n = feat.size();
  if (out.heatmap.numel() != n) throw DimensionError("decode: head output does not match the voxels");
  const std::size_t bins = static_cast<std::size_t>(cfg.heading_bins);
  std::vector<Detection> dets;
  for (auto i : local_maxima(feat.coords, feat.grid, out.heatmap.values(), cfg.delta2)) {
    const Coord c = feat.coords[i];
    auto b = out.box.values().subspan(i * 6, 6);
    auto logits = out.bin_logits.values().subspan(i * bins, bins);
    const auto bin = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    Detection d;
    d.cls = cls;
    d.score = out.heatmap[i];
    d.box = {grid.center_x(c.col, feat.stride) + b[0],
             grid.center_y(c.row, feat.stride) + b[1],
             b[2],
             std::max(b[3], 1e-3),
             std::max(b[4], 1e-3),
             std::max(b[5], 1e-3),
             decode_heading(bin, out.bin_residuals[i * bins + bin], cfg.heading_bins)};
    dets.push_back(d);
  }
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
  return dets;
}

}  // namespace swformer
