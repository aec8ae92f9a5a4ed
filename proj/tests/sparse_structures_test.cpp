#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "swformer/error.hpp"
#include "swformer/partition.hpp"
#include "swformer/rng.hpp"

namespace swformer {
namespace {

SparseBEV make_bev(std::vector<Coord> coords, GridShape grid, std::size_t channels, Rng& rng, int stride = 1) {
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
  std::vector<double> f(coords.size() * channels);
  for (auto& v : f) v = rng.uniform(-2, 2);
  SparseBEV bev;
  bev.coords = std::move(coords);
  bev.grid = grid;
  bev.stride = stride;
  bev.features = Tensor({bev.coords.size(), channels}, std::move(f));
  return bev;
}

SparseBEV random_bev(int rows, int cols, double occupancy, std::size_t channels, Rng& rng, int stride = 1) {
  std::vector<Coord> coords;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (rng.bernoulli(occupancy)) coords.push_back({r, c});
  return make_bev(std::move(coords), {rows, cols}, channels, rng, stride);
}

// The 8x8 scene with 4x4 windows: four occupied windows unshifted, five once
// shifted by half a window.
std::vector<Coord> shift_figure_cells() { return {{0, 0}, {3, 3}, {1, 5}, {5, 1}, {6, 6}}; }

TEST(WindowConfig, Capacities) {
  EXPECT_EQ(WindowConfig{}.capacities(), (std::vector<int>{100, 50, 25, 13, 7, 4}));
  EXPECT_EQ((WindowConfig{4, 4, 6}).capacities(), (std::vector<int>{16, 8, 4}));
  EXPECT_EQ((WindowConfig{1, 1, 6}).capacities(), (std::vector<int>{1}));
  EXPECT_THROW((WindowConfig{0, 4, 6}).capacities(), ContractError);
}

TEST(WindowPartition, EmptyInput) {
  Rng rng(1);
  auto set = window_partition(make_bev({}, {8, 8}, 2, rng), WindowConfig{});
  EXPECT_EQ(set.num_windows(), 0u);
  auto shifted = shifted_partition(make_bev({}, {8, 8}, 2, rng), WindowConfig{}, ShiftSpec::half(WindowConfig{}));
  EXPECT_EQ(shifted.num_windows(), 0u);
}

TEST(WindowPartition, SingleVoxelInSmallestBucket) {
  Rng rng(1);
  auto set = window_partition(make_bev({{13, 27}}, {64, 64}, 2, rng), WindowConfig{});
  ASSERT_EQ(set.num_windows(), 1u);
  const auto& last = set.buckets.back();
  ASSERT_EQ(last.num_windows(), 1u);
  EXPECT_EQ(last.capacity, 4);
  EXPECT_EQ(last.windows[0], (Coord{1, 2}));
  EXPECT_EQ(last.slot_source, (std::vector<std::int64_t>{0, -1, -1, -1}));
  EXPECT_EQ(last.valid, (std::vector<std::uint8_t>{1, 0, 0, 0}));
}

TEST(WindowPartition, ShiftFigureFourThenFive) {
  Rng rng(1);
  const WindowConfig cfg{4, 4, 6};
  auto bev = make_bev(shift_figure_cells(), {8, 8}, 2, rng);
  EXPECT_EQ(window_partition(bev, cfg).num_windows(), 4u);
  EXPECT_EQ(shifted_partition(bev, cfg, ShiftSpec::half(cfg)).num_windows(), 5u);
}

TEST(WindowPartition, DebugDumpGolden) {
  Rng rng(1);
  const WindowConfig cfg{4, 4, 6};
  auto bev = make_bev(shift_figure_cells(), {8, 8}, 2, rng);
  EXPECT_EQ(dump_windows(window_partition(bev, cfg)), "2,0,0,2\n2,0,1,1\n2,1,0,1\n2,1,1,1\n");
  EXPECT_EQ(dump_windows(shifted_partition(bev, cfg, ShiftSpec::half(cfg))),
            "2,0,0,1\n2,0,1,1\n2,1,0,1\n2,1,1,1\n2,2,2,1\n");
}

TEST(WindowPartition, BijectionAndTightBuckets) {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 40));
    auto bev = random_bev(n, n, rng.uniform(0.0, 1.0), 1, rng);
    const WindowConfig cfg{static_cast<int>(rng.uniform_int(1, 10)), static_cast<int>(rng.uniform_int(1, 10)), 6};
    auto set = window_partition(bev, cfg);
    const auto caps = cfg.capacities();
    std::vector<int> seen(bev.size(), 0);
    for (std::size_t b = 0; b < set.buckets.size(); ++b) {
      const auto& bucket = set.buckets[b];
      ASSERT_EQ(bucket.slot_source.size(), bucket.num_windows() * bucket.capacity);
      for (std::size_t w = 0; w < bucket.num_windows(); ++w) {
        int valid = 0;
        for (int s = 0; s < bucket.capacity; ++s) {
          const auto src = bucket.slot_source[w * bucket.capacity + s];
          if (src >= 0) {
            ++seen[src];
            ++valid;
            const Coord c = bev.coords[src];
            EXPECT_EQ(bucket.windows[w], (Coord{c.row / cfg.height, c.col / cfg.width}));
          }
        }
        EXPECT_GE(valid, 1);
        if (b + 1 < caps.size()) {
          EXPECT_GT(valid, caps[b + 1]);
        }
      }
    }
    for (int s : seen) EXPECT_EQ(s, 1);
  }
}

TEST(ShiftedPartition, EqualsPartitionOfOffsetCoordinates) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto bev = random_bev(30, 30, rng.uniform(0.02, 0.6), 1, rng);
    const WindowConfig cfg{7, 5, 6};
    const ShiftSpec shift = ShiftSpec::half(cfg);
    std::vector<Coord> moved;
    for (auto c : bev.coords) moved.push_back({c.row + shift.row, c.col + shift.col});
    auto a = shifted_partition(bev, cfg, shift);
    auto b = window_partition(moved, cfg);
    ASSERT_EQ(a.buckets.size(), b.buckets.size());
    for (std::size_t i = 0; i < a.buckets.size(); ++i) {
      EXPECT_EQ(a.buckets[i].windows, b.buckets[i].windows);
      EXPECT_EQ(a.buckets[i].slot_source, b.buckets[i].slot_source);
      EXPECT_EQ(a.buckets[i].slot_coord, b.buckets[i].slot_coord);
    }
  }
}

TEST(ShiftedPartition, RejectsShiftOutsideWindow) {
  Rng rng(1);
  EXPECT_THROW(shifted_partition(make_bev({{1, 1}}, {8, 8}, 1, rng), WindowConfig{4, 4, 6}, ShiftSpec{4, 0}),
               ContractError);
}

TEST(GatherBucket, PaddedSlotsAreZero) {
  Rng rng(2);
  auto bev = random_bev(12, 12, 0.3, 3, rng);
  auto set = window_partition(bev, WindowConfig{4, 4, 6});
  for (const auto& bucket : set.buckets) {
    if (bucket.num_windows() == 0) continue;
    Tensor t = gather_bucket(bev.features, bucket);
    for (std::size_t s = 0; s < bucket.slot_source.size(); ++s)
      for (std::size_t j = 0; j < 3; ++j) {
        const double expect = bucket.slot_source[s] < 0 ? 0.0 : bev.features.at(bucket.slot_source[s], j);
        EXPECT_EQ(t[s * 3 + j], expect);
      }
  }
}

TEST(StridedPartition, SingleVoxelKeepsFeature) {
  Rng rng(3);
  auto bev = make_bev({{13, 6}}, {16, 16}, 4, rng);
  auto out = strided_partition(bev, 4);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.coords[0], (Coord{3, 1}));
  EXPECT_EQ(out.stride, 4);
  EXPECT_EQ(out.grid, (GridShape{4, 4}));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(out.features[j], bev.features[j]);
}

TEST(StridedPartition, SixteenGridStrideFour) {
  Rng rng(4);
  auto bev = random_bev(16, 16, 0.3, 2, rng);
  auto out = strided_partition(bev, 4);
  EXPECT_LE(out.size(), 16u);
  out.validate();
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Feature copied from an occupied voxel of the same cell.
    bool found = false;
    for (std::size_t s = 0; s < bev.size(); ++s) {
      if (bev.coords[s].row / 4 != out.coords[i].row || bev.coords[s].col / 4 != out.coords[i].col) continue;
      found |= bev.features.at(s, 0) == out.features.at(i, 0) && bev.features.at(s, 1) == out.features.at(i, 1);
    }
    EXPECT_TRUE(found);
  }
}

TEST(StridedPartition, MatchesExhaustiveArgmin) {
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const int factor = trial % 3 == 0 ? 2 : (trial % 3 == 1 ? 4 : 8);
    auto bev = random_bev(24, 20, rng.uniform(0.05, 0.7), 1, rng);
    auto out = strided_partition(bev, factor);
    std::size_t expected_cells = 0;
    for (int cr = 0; cr * factor < 24; ++cr)
      for (int cc = 0; cc * factor < 20; ++cc) {
        const double center_r = cr * factor + (factor - 1) / 2.0;
        const double center_c = cc * factor + (factor - 1) / 2.0;
        double best = std::numeric_limits<double>::infinity();
        std::int64_t pick = -1;
        // Equidistant candidates: the scan is row-major, so strict < keeps
        // the smallest coordinate.
        for (int r = cr * factor; r < (cr + 1) * factor; ++r)
          for (int c = cc * factor; c < (cc + 1) * factor; ++c) {
            auto idx = bev.find({r, c});
            if (!idx) continue;
            const double d = (r - center_r) * (r - center_r) + (c - center_c) * (c - center_c);
            if (d < best) {
              best = d;
              pick = static_cast<std::int64_t>(*idx);
            }
          }
        auto got = out.find({cr, cc});
        if (pick < 0) {
          EXPECT_FALSE(got.has_value());
          continue;
        }
        ++expected_cells;
        ASSERT_TRUE(got.has_value());
        EXPECT_EQ(out.features.at(*got, 0), bev.features.at(pick, 0));
      }
    EXPECT_EQ(out.size(), expected_cells);
  }
}

TEST(StridedPartition, SparseSingletonsPreserved) {
  Rng rng(10);
  std::vector<Coord> coords;
  for (int cr = 0; cr < 8; ++cr)
    for (int cc = 0; cc < 8; ++cc)
      if (rng.bernoulli(0.5)) coords.push_back({cr * 2 + int(rng.uniform_int(0, 1)), cc * 2 + int(rng.uniform_int(0, 1))});
  auto bev = make_bev(coords, {16, 16}, 3, rng);
  auto out = strided_partition(bev, 2);
  ASSERT_EQ(out.size(), bev.size());
  for (std::size_t i = 0; i < bev.size(); ++i) {
    const auto j = out.find({bev.coords[i].row / 2, bev.coords[i].col / 2});
    ASSERT_TRUE(j.has_value());
    for (std::size_t ch = 0; ch < 3; ++ch) EXPECT_EQ(out.features.at(*j, ch), bev.features.at(i, ch));
  }
}

TEST(SparseUpsample, EmptyTemplate) {
  Rng rng(1);
  auto coarse = random_bev(4, 4, 1.0, 2, rng, 4);
  auto out = sparse_upsample(coarse, make_bev({}, {16, 16}, 2, rng));
  EXPECT_TRUE(out.empty());
}

TEST(SparseUpsample, ParentFeature) {
  Rng rng(1);
  auto coarse = random_bev(4, 4, 1.0, 2, rng, 4);
  auto fine = make_bev({{9, 14}}, {16, 16}, 2, rng);
  auto out = sparse_upsample(coarse, fine);
  ASSERT_EQ(out.size(), 1u);
  const auto parent = *coarse.find({2, 3});
  EXPECT_EQ(out.features.at(0, 0), coarse.features.at(parent, 0));
  EXPECT_EQ(out.features.at(0, 1), coarse.features.at(parent, 1));
}

TEST(SparseUpsample, MatchesMaskedDenseUpsample) {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    auto coarse = random_bev(8, 8, rng.uniform(0.1, 0.9), 3, rng, 4);
    auto fine = random_bev(16, 16, rng.uniform(0.1, 0.9), 3, rng, 2);
    auto out = sparse_upsample(coarse, fine);
    EXPECT_EQ(out.coords, fine.coords);
    DenseGrid cg = scatter_to_dense(coarse);
    std::vector<int> occupied(64, 0);
    for (auto c : coarse.coords) occupied[c.row * 8 + c.col] = 1;
    for (std::size_t i = 0; i < fine.size(); ++i) {
      const Coord c = fine.coords[i];
      for (int j = 0; j < 3; ++j) {
        const double dense = occupied[(c.row / 2) * 8 + c.col / 2] ? cg.at(c.row / 2, c.col / 2, j) : 0.0;
        EXPECT_EQ(out.features.at(i, j), dense);
      }
    }
  }
}

TEST(SparseUpsample, StrideMismatchThrows) {
  Rng rng(1);
  EXPECT_THROW(sparse_upsample(random_bev(4, 4, 1.0, 1, rng, 3), random_bev(8, 8, 0.5, 1, rng, 2)), ContractError);
}

TEST(ScatterToDense, EmptyIsFill) {
  Rng rng(1);
  DenseGrid g = scatter_to_dense(make_bev({}, {4, 5}, 2, rng), 0.5);
  for (double v : g.values) EXPECT_EQ(v, 0.5);
}

TEST(ScatterToDense, SingleVoxel) {
  Rng rng(1);
  auto bev = make_bev({{2, 3}}, {6, 6}, 1, rng);
  DenseGrid g = scatter_to_dense(bev);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) EXPECT_EQ(g.at(r, c, 0), (r == 2 && c == 3) ? bev.features[0] : 0.0);
}

TEST(ScatterToDense, RoundTrip) {
  Rng rng(1);
  auto bev = random_bev(20, 13, 0.4, 3, rng);
  auto back = gather_from_dense(scatter_to_dense(bev), bev.coords);
  ASSERT_EQ(back.size(), bev.features.numel());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back[i], bev.features[i]);
}

TEST(ScatterToDense, OutOfGridThrows) {
  Rng rng(1);
  auto bev = make_bev({{2, 3}}, {6, 6}, 1, rng);
  bev.grid = {2, 2};
  EXPECT_THROW(scatter_to_dense(bev), ContractError);
}

TEST(DenseMaxPool, IdentityAtOne) {
  Rng rng(1);
  DenseGrid g = scatter_to_dense(random_bev(7, 9, 0.5, 2, rng));
  EXPECT_EQ(dense_max_pool(g, 1).values, g.values);
}

TEST(DenseMaxPool, SingleCellBlock) {
  DenseGrid g(8, 8, 1, 0.0);
  g.at(1, 6, 0) = 3.0;
  DenseGrid out = dense_max_pool(g, 5);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      const bool inside = std::abs(r - 1) <= 2 && std::abs(c - 6) <= 2;
      EXPECT_EQ(out.at(r, c, 0), inside ? 3.0 : 0.0);
    }
}

TEST(DenseMaxPool, MatchesNaiveLoop) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    DenseGrid g(11, 7, 2, 0.0);
    for (auto& v : g.values) v = rng.uniform(-3, 3);
    const double fill = trial % 2 ? -1.0 : 0.0;
    DenseGrid out = dense_max_pool(g, 3, fill);
    for (int r = 0; r < 11; ++r)
      for (int c = 0; c < 7; ++c)
        for (int ch = 0; ch < 2; ++ch) {
          double m = -std::numeric_limits<double>::infinity();
          for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
              const int rr = r + dr, cc = c + dc;
              m = std::max(m, (rr < 0 || cc < 0 || rr >= 11 || cc >= 7) ? fill : g.at(rr, cc, ch));
            }
          EXPECT_EQ(out.at(r, c, ch), m);
        }
  }
}

TEST(DenseMaxPool, EvenWindowThrows) {
  EXPECT_THROW(dense_max_pool(DenseGrid(3, 3, 1, 0.0), 4), ContractError);
}

TEST(Determinism, RepeatedPartitionsIdentical) {
  Rng a(77), b(77);
  auto bev1 = random_bev(40, 40, 0.2, 1, a);
  auto bev2 = random_bev(40, 40, 0.2, 1, b);
  EXPECT_EQ(dump_windows(window_partition(bev1, WindowConfig{})), dump_windows(window_partition(bev2, WindowConfig{})));
}

}  // namespace
}  // namespace swformer
