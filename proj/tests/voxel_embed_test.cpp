#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "swformer/error.hpp"
#include "swformer/voxel.hpp"

namespace swformer {
namespace {

VoxelGrid default_grid() { return VoxelGrid{Extent{0, 0, 40.96, 40.96}, 0.32}; }

Point make_point(double x, double y, double z, double intensity = 0.3, double elong = 0.1, double t = 0) {
  return Point{x, y, z, intensity, elong, t};
}

TEST(NormalizePoint, Tanh) {
  EXPECT_EQ(normalize_point_features(make_point(1, 2, 3, 0.0, 0.0)).intensity, 0.0);
  EXPECT_NEAR(normalize_point_features(make_point(1, 2, 3, 50.0)).intensity, 1.0, 1e-12);
  const Point p = normalize_point_features(make_point(1, 2, 3, 0.5, 2.0));
  EXPECT_NEAR(p.intensity, 0.46211715726, 1e-11);
  EXPECT_EQ(p.elongation, std::tanh(2.0));
  EXPECT_EQ(p.x, 1.0);
  EXPECT_EQ(p.z, 3.0);
}

TEST(DynamicVoxelize, GridShape) {
  EXPECT_EQ(default_grid().shape(), (GridShape{128, 128}));
}

TEST(DynamicVoxelize, NearbyPointsShareVoxel) {
  auto a = dynamic_voxelize({make_point(0.65, 1.0, 0), make_point(0.75, 1.0, 0)}, default_grid());
  ASSERT_EQ(a.voxels.size(), 1u);
  EXPECT_EQ(a.voxel_points[0].size(), 2u);
}

TEST(DynamicVoxelize, HeightNeverPartitions) {
  auto a = dynamic_voxelize({make_point(5, 5, 0), make_point(5, 5, 10)}, default_grid());
  ASSERT_EQ(a.voxels.size(), 1u);
  EXPECT_EQ((a.voxels[0]), (Coord{15, 15}));
}

TEST(DynamicVoxelize, OutOfExtentDropped) {
  auto a = dynamic_voxelize({make_point(-0.1, 1, 0), make_point(41.0, 1, 0), make_point(1, 1, 0),
                             make_point(std::nan(""), 1, 0)},
                            default_grid());
  EXPECT_EQ(a.dropped, 3u);
  EXPECT_EQ(a.point_voxel[0], -1);
  EXPECT_EQ(a.point_voxel[2], 0);
}

TEST(DynamicVoxelize, PartitionMatchesRebinning) {
  Rng rng(42);
  std::vector<Point> pts;
  for (int i = 0; i < 1000; ++i) pts.push_back(make_point(rng.uniform(-2, 43), rng.uniform(-2, 43), rng.uniform(-1, 3)));
  const auto grid = default_grid();
  auto a = dynamic_voxelize(pts, grid);
  std::vector<int> seen(pts.size(), 0);
  for (std::size_t v = 0; v < a.voxels.size(); ++v) {
    for (auto idx : a.voxel_points[v]) {
      ++seen[idx];
      const int col = static_cast<int>(std::floor(pts[idx].x / 0.32));
      const int row = static_cast<int>(std::floor(pts[idx].y / 0.32));
      EXPECT_EQ(a.voxels[v], (Coord{row, col}));
    }
  }
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const bool inside = pts[i].x >= 0 && pts[i].y >= 0 && pts[i].x < 40.96 && pts[i].y < 40.96;
    EXPECT_EQ(seen[i], inside ? 1 : 0);
    dropped += inside ? 0 : 1;
  }
  EXPECT_EQ(a.dropped, dropped);
  EXPECT_TRUE(std::is_sorted(a.voxels.begin(), a.voxels.end()));
}

class EmbedTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(7);
    params = make_embed_params(store, "embed", 8, rng);
    // Non-trivial affine parameters so pooling is not dominated by zeros.
    for (auto* t : {&params.b1, &params.ln1_bias, &params.b2, &params.ln2_bias})
      for (auto& v : t->mutable_values()) v = rng.uniform(-0.5, 0.5);
  }

  ParamStore store;
  EmbedParams params;
};

TEST_F(EmbedTest, EmptySceneGivesEmptyBev) {
  auto bev = embed_and_pool(dynamic_voxelize({}, default_grid()), {}, params);
  EXPECT_TRUE(bev.empty());
  EXPECT_EQ(bev.channels(), 8u);
}

TEST_F(EmbedTest, SingletonEqualsPointEmbedding) {
  const Point p = make_point(3.3, 7.1, 0.7, 0.4, 0.2, -0.1);
  auto a = dynamic_voxelize({p}, default_grid());
  auto bev = embed_and_pool(a, {p}, params);
  ASSERT_EQ(bev.size(), 1u);
  EXPECT_EQ(bev.features.dim(1), 8u);
  auto twice = dynamic_voxelize({p, p}, default_grid());
  auto bev2 = embed_and_pool(twice, {p, p}, params);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(bev.features[j], bev2.features[j]);
}

TEST_F(EmbedTest, MaxPoolMatchesBruteForce) {
  Rng rng(3);
  std::vector<Point> pts;
  for (int i = 0; i < 5; ++i)
    pts.push_back(make_point(rng.uniform(3.21, 3.51), rng.uniform(6.41, 6.71), rng.uniform(0, 2),
                             rng.uniform(0, 1), rng.uniform(0, 1), -0.1 * i));
  auto a = dynamic_voxelize(pts, default_grid());
  ASSERT_EQ(a.voxels.size(), 1u);
  auto bev = embed_and_pool(a, pts, params);
  std::vector<double> expect(8, -1e300);
  for (const auto& p : pts) {
    // A point alone in the same voxel has the same per-point embedding.
    auto single = embed_and_pool(dynamic_voxelize({p}, default_grid()), {p}, params);
    for (std::size_t j = 0; j < 8; ++j) expect[j] = std::max(expect[j], single.features[j]);
  }
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(bev.features[j], expect[j]);
}

TEST_F(EmbedTest, PermutationWithinVoxelIsBitIdentical) {
  Rng rng(5);
  std::vector<Point> pts;
  for (int i = 0; i < 40; ++i) pts.push_back(make_point(rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0, 2)));
  auto bev = embed_and_pool(dynamic_voxelize(pts, default_grid()), pts, params);
  std::vector<Point> shuffled(pts.rbegin(), pts.rend());
  std::swap(shuffled[3], shuffled[17]);
  auto bev2 = embed_and_pool(dynamic_voxelize(shuffled, default_grid()), shuffled, params);
  EXPECT_EQ(bev.coords, bev2.coords);
  for (std::size_t i = 0; i < bev.features.numel(); ++i) EXPECT_EQ(bev.features[i], bev2.features[i]);
  std::set<Coord> distinct(bev.coords.begin(), bev.coords.end());
  EXPECT_EQ(distinct.size(), bev.size());
}

TEST_F(EmbedTest, VoxelAlignedTranslationShiftsCoordinates) {
  Rng rng(6);
  std::vector<Point> pts, moved;
  for (int i = 0; i < 30; ++i) {
    // Points chosen away from cell borders so the shift is exact in binning.
    const double x = 0.32 * rng.uniform_int(2, 40) + 0.16 + rng.uniform(-0.1, 0.1);
    const double y = 0.32 * rng.uniform_int(2, 40) + 0.16 + rng.uniform(-0.1, 0.1);
    pts.push_back(make_point(x, y, rng.uniform(0, 2)));
    moved.push_back(make_point(x + 0.32 * 5, y + 0.32 * 3, pts.back().z));
  }
  auto a = embed_and_pool(dynamic_voxelize(pts, default_grid()), pts, params);
  auto b = embed_and_pool(dynamic_voxelize(moved, default_grid()), moved, params);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(b.coords[i], (Coord{a.coords[i].row + 3, a.coords[i].col + 5}));
  }
  for (std::size_t i = 0; i < a.features.numel(); ++i) EXPECT_NEAR(a.features[i], b.features[i], 1e-9);
}

TEST(DynamicVoxelize, RejectsNonPositiveVoxelSize) {
  EXPECT_THROW(dynamic_voxelize({}, VoxelGrid{Extent{}, 0.0}), ContractError);
}

}  // namespace
}  // namespace swformer
