#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <vector>

#include "swformer/tensor.hpp"

namespace swformer {

// Integer BEV voxel coordinate; ordering is row-major.
struct Coord {
  std::int32_t row = 0;
  std::int32_t col = 0;
  auto operator<=>(const Coord&) const = default;
};

struct GridShape {
  int rows = 0;
  int cols = 0;
  bool contains(Coord c) const { return c.row >= 0 && c.col >= 0 && c.row < rows && c.col < cols; }
  auto operator<=>(const GridShape&) const = default;
};

// Occupied voxels of one scale: unique coordinates sorted row-major and a
// [size, channels] feature matrix. Coordinates are in units of this scale's
// stride; `grid` is the extent at that stride.
struct SparseBEV {
  std::vector<Coord> coords;
  Tensor features = Tensor::zeros({0, 0});
  int stride = 1;
  GridShape grid;

  std::size_t size() const { return coords.size(); }
  bool empty() const { return coords.empty(); }
  std::size_t channels() const { return features.rank() == 2 ? features.dim(1) : 0; }

  std::optional<std::size_t> find(Coord c) const;
  // Throws ContractError when coordinates are unsorted, duplicated, out of the
  // grid, or disagree with the feature row count.
  void validate() const;
};

// Dense [rows, cols, channels] buffer used by scatter and pooling.
struct DenseGrid {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  std::vector<double> values;

  DenseGrid() = default;
  DenseGrid(int r, int c, int ch, double fill) : rows(r), cols(c), channels(ch), values(std::size_t(r) * c * ch, fill) {}

  double& at(int r, int c, int ch) { return values[(std::size_t(r) * cols + c) * channels + ch]; }
  double at(int r, int c, int ch) const { return values[(std::size_t(r) * cols + c) * channels + ch]; }
};

}  // namespace swformer
