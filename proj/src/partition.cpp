#include "swformer/partition.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <sstream>

#include "swformer/error.hpp"
#include "swformer/ops.hpp"

namespace swformer {

namespace {

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

}  // namespace

std::vector<int> WindowConfig::capacities() const {
  validate();
  const int area = height * width;
  std::vector<int> caps;
  for (int i = 0; i < max_buckets; ++i) {
    const int cap = (area + (1 << i) - 1) >> i;
    if (!caps.empty() && (cap < 4 || cap == caps.back())) break;
    caps.push_back(cap);
  }
  return caps;
}

void WindowConfig::validate() const {
  require(height >= 1 && width >= 1, "window size must be at least 1x1");
  require(max_buckets >= 1 && max_buckets < 31, "bucket count must be in [1, 30]");
}

std::size_t BucketedWindowSet::num_windows() const {
  std::size_t n = 0;
  for (const auto& b : buckets) n += b.num_windows();
  return n;
}

std::size_t BucketedWindowSet::num_slots_used() const {
  std::size_t n = 0;
  for (const auto& b : buckets)
    for (auto v : b.valid) n += v;
  return n;
}

BucketedWindowSet window_partition(std::span<const Coord> coords, const WindowConfig& cfg, ShiftSpec shift) {
  BucketedWindowSet set;
  set.config = cfg;
  set.shift = shift;
  const auto caps = cfg.capacities();
  for (int c : caps) set.buckets.push_back(WindowBucket{c, {}, {}, {}, {}});

  std::map<Coord, std::vector<std::size_t>> windows;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const Coord s{coords[i].row + shift.row, coords[i].col + shift.col};
    windows[{floor_div(s.row, cfg.height), floor_div(s.col, cfg.width)}].push_back(i);
  }
  for (auto& [win, members] : windows) {
    // Slot order is row-major in the shifted frame, which the shift preserves.
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) { return coords[a] < coords[b]; });
    const int n = static_cast<int>(members.size());
    std::size_t b = 0;
    while (b + 1 < caps.size() && caps[b + 1] >= n) ++b;
    WindowBucket& bucket = set.buckets[b];
    bucket.windows.push_back(win);
    for (int slot = 0; slot < bucket.capacity; ++slot) {
      if (slot < n) {
        const Coord c = coords[members[slot]];
        bucket.slot_source.push_back(static_cast<std::int64_t>(members[slot]));
        bucket.valid.push_back(1);
        bucket.slot_coord.push_back({c.row + shift.row, c.col + shift.col});
      } else {
        bucket.slot_source.push_back(-1);
        bucket.valid.push_back(0);
        bucket.slot_coord.push_back({0, 0});
      }
    }
  }
  return set;
}

BucketedWindowSet window_partition(const SparseBEV& bev, const WindowConfig& cfg) {
  return window_partition(bev.coords, cfg, {});
}

BucketedWindowSet shifted_partition(const SparseBEV& bev, const WindowConfig& cfg, ShiftSpec shift) {
  require(shift.row >= 0 && shift.row < cfg.height && shift.col >= 0 && shift.col < cfg.width,
          "window shift must lie inside the window extent");
  return window_partition(bev.coords, cfg, shift);
}

Tensor gather_bucket(const Tensor& features, const WindowBucket& bucket) {
  const std::size_t c = features.dim(1);
  return reshape(gather_rows(features, bucket.slot_source),
                 {bucket.num_windows(), static_cast<std::size_t>(bucket.capacity), c});
}

std::string dump_windows(const BucketedWindowSet& set) {
  std::ostringstream os;
  for (std::size_t b = 0; b < set.buckets.size(); ++b) {
    const auto& bucket = set.buckets[b];
    for (std::size_t w = 0; w < bucket.num_windows(); ++w) {
      int n = 0;
      for (int s = 0; s < bucket.capacity; ++s) n += bucket.valid[w * bucket.capacity + s];
      os << b << ',' << bucket.windows[w].row << ',' << bucket.windows[w].col << ',' << n << '\n';
    }
  }
  return os.str();
}

StridedSelection strided_select(std::span<const Coord> coords, int factor) {
  require(factor >= 1, "stride factor must be positive");
  // Distances are compared at twice the voxel resolution so the cell center
  // (offset (factor-1)/2) stays integral.
  std::map<Coord, std::pair<long, std::size_t>> best;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const Coord c = coords[i];
    const Coord cell{floor_div(c.row, factor), floor_div(c.col, factor)};
    const long dr = 2L * c.row - (2L * cell.row * factor + factor - 1);
    const long dc = 2L * c.col - (2L * cell.col * factor + factor - 1);
    const long dist = dr * dr + dc * dc;
    auto it = best.find(cell);
    if (it == best.end()) {
      best.emplace(cell, std::make_pair(dist, i));
    } else if (dist < it->second.first || (dist == it->second.first && c < coords[it->second.second])) {
      it->second = {dist, i};
    }
  }
  StridedSelection out;
  for (const auto& [cell, pick] : best) {
    out.coords.push_back(cell);
    out.source.push_back(static_cast<std::int64_t>(pick.second));
  }
  return out;
}

SparseBEV strided_partition(const SparseBEV& bev, int factor) {
  const StridedSelection sel = strided_select(bev.coords, factor);
  SparseBEV out;
  out.coords = sel.coords;
  out.stride = bev.stride * factor;
  out.grid = {(bev.grid.rows + factor - 1) / factor, (bev.grid.cols + factor - 1) / factor};
  out.features = gather_rows(bev.features, sel.source);
  return out;
}

SparseBEV sparse_upsample(const SparseBEV& coarse, const SparseBEV& fine_template) {
  if (fine_template.stride <= 0 || coarse.stride % fine_template.stride != 0) {
    throw ContractError("sparse_upsample: coarse stride " + std::to_string(coarse.stride) +
                        " is not a multiple of " + std::to_string(fine_template.stride));
  }
  const int f = coarse.stride / fine_template.stride;
  std::vector<std::int64_t> parent(fine_template.size(), -1);
  for (std::size_t i = 0; i < fine_template.size(); ++i) {
    const Coord c = fine_template.coords[i];
    if (auto idx = coarse.find({floor_div(c.row, f), floor_div(c.col, f)})) parent[i] = static_cast<std::int64_t>(*idx);
  }
  SparseBEV out;
  out.coords = fine_template.coords;
  out.stride = fine_template.stride;
  out.grid = fine_template.grid;
  out.features = gather_rows(coarse.features, parent);
  return out;
}

DenseGrid scatter_to_dense(const SparseBEV& bev, double fill) {
  const int ch = static_cast<int>(bev.channels());
  DenseGrid grid(bev.grid.rows, bev.grid.cols, ch, fill);
  auto fv = bev.features.values();
  for (std::size_t i = 0; i < bev.size(); ++i) {
    const Coord c = bev.coords[i];
    if (!bev.grid.contains(c)) throw ContractError("scatter_to_dense: coordinate outside grid");
    for (int j = 0; j < ch; ++j) grid.at(c.row, c.col, j) = fv[i * ch + j];
  }
  return grid;
}

std::vector<double> gather_from_dense(const DenseGrid& grid, std::span<const Coord> coords) {
  std::vector<double> out;
  out.reserve(coords.size() * grid.channels);
  for (const Coord c : coords) {
    if (c.row < 0 || c.col < 0 || c.row >= grid.rows || c.col >= grid.cols) {
      throw ContractError("gather_from_dense: coordinate outside grid");
    }
    for (int j = 0; j < grid.channels; ++j) out.push_back(grid.at(c.row, c.col, j));
  }
  return out;
}

DenseGrid dense_max_pool(const DenseGrid& grid, int k, double fill) {
  if (k < 1 || k % 2 == 0) throw ContractError("dense_max_pool: window must be odd and positive, got " + std::to_string(k));
  const int r = k / 2;
  // Separable: max along columns, then along rows.
  DenseGrid horiz(grid.rows, grid.cols, grid.channels, fill);
  for (int y = 0; y < grid.rows; ++y)
    for (int x = 0; x < grid.cols; ++x)
      for (int ch = 0; ch < grid.channels; ++ch) {
        double m = (x - r < 0 || x + r >= grid.cols) ? fill : -std::numeric_limits<double>::infinity();
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx;
          if (xx >= 0 && xx < grid.cols) m = std::max(m, grid.at(y, xx, ch));
        }
        horiz.at(y, x, ch) = m;
      }
  DenseGrid out(grid.rows, grid.cols, grid.channels, fill);
  for (int y = 0; y < grid.rows; ++y)
    for (int x = 0; x < grid.cols; ++x)
      for (int ch = 0; ch < grid.channels; ++ch) {
        double m = (y - r < 0 || y + r >= grid.rows) ? fill : -std::numeric_limits<double>::infinity();
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = y + dy;
          if (yy >= 0 && yy < grid.rows) m = std::max(m, horiz.at(yy, x, ch));
        }
        out.at(y, x, ch) = m;
      }
  return out;
}

}  // namespace swformer
