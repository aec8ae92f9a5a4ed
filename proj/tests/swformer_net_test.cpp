#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "dense_reference.hpp"
#include "swformer/backbone.hpp"
#include "swformer/error.hpp"
#include "test_util.hpp"

namespace swformer {
namespace {

namespace ref = reference;

SparseBEV random_bev(int rows, int cols, double density, std::size_t ch, Rng& rng) {
  SparseBEV bev;
  bev.grid = {rows, cols};
  std::vector<double> feats;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!rng.bernoulli(density)) continue;
      bev.coords.push_back({r, c});
      for (std::size_t j = 0; j < ch; ++j) feats.push_back(rng.uniform(-1.0, 1.0));
    }
  }
  bev.features = Tensor({bev.coords.size(), ch}, std::move(feats));
  return bev;
}

ref::Mat rows_of(const Tensor& t, std::size_t window) {
  const std::size_t len = t.dim(1), ch = t.dim(2);
  ref::Mat out(len, ref::Vec(ch));
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < ch; ++j) out[i][j] = t[(window * len + i) * ch + j];
  return out;
}

struct LayerFixture : ::testing::Test {
  Rng rng{11};
  ParamStore store;
  TransformerLayerParams params;

  void SetUp() override {
    params = make_transformer_layer(store, "t", 8, 2, 2, rng);
    ref::randomize(store, rng);
  }
};

TEST_F(LayerFixture, SingleTokenClosedForm) {
  Tensor x = testing::random_tensor({1, 1, 8}, rng, -1, 1, false);
  std::vector<std::uint8_t> valid{1};
  Tensor y = transformer_layer(x, valid, params);
  // One token attends only to itself, so attention returns its value vector.
  ref::Vec in = ref::values_of(x);
  ref::Vec o = ref::affine(ref::affine(in, params.wv, params.bv), params.wo, params.bo);
  for (std::size_t c = 0; c < 8; ++c) o[c] += in[c];
  ref::Vec h = ref::norm(o, params.ln1_gain, params.ln1_bias);
  ref::Vec m = ref::affine(h, params.w1, params.b1);
  for (auto& v : m) v = ref::gelu_scalar(v);
  m = ref::affine(m, params.w2, params.b2);
  for (std::size_t c = 0; c < 8; ++c) m[c] += h[c];
  ref::Vec expect = ref::norm(m, params.ln2_gain, params.ln2_bias);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(y[c], expect[c], 1e-12);
}

TEST_F(LayerFixture, FullyMaskedWindowIsZero) {
  Tensor x = testing::random_tensor({1, 5, 8}, rng, -1, 1, false);
  std::vector<std::uint8_t> valid(5, 0);
  Tensor y = transformer_layer(x, valid, params);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST_F(LayerFixture, PaddedWindowMatchesDenseMaskedOracle) {
  Tensor x = testing::random_tensor({2, 10, 8}, rng, -1, 1, false);
  std::vector<std::uint8_t> valid{1, 0, 1, 1, 0, 1, 0, 1, 1, 0, 0, 1, 1, 1, 1, 1, 1, 0, 1, 1};
  Tensor y = transformer_layer(x, valid, params);
  for (std::size_t w = 0; w < 2; ++w) {
    std::vector<bool> mask(valid.begin() + w * 10, valid.begin() + (w + 1) * 10);
    ref::Mat expect = ref::layer(rows_of(x, w), mask, params);
    ref::Mat got = rows_of(y, w);
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(got[i][j], expect[i][j], 1e-9);
  }
}

TEST_F(LayerFixture, ShapeErrors) {
  std::vector<std::uint8_t> valid(3, 1);
  EXPECT_THROW(transformer_layer(Tensor::zeros({1, 3, 6}), valid, params), DimensionError);
  EXPECT_THROW(transformer_layer(Tensor::zeros({1, 4, 8}), valid, params), DimensionError);
  EXPECT_THROW(make_transformer_layer(store, "bad", 8, 3, 2, rng), ContractError);
}

TEST_F(LayerFixture, GradientsMatchFiniteDifferences) {
  Tensor x = testing::random_tensor({1, 4, 8}, rng, -1, 1, true);
  std::vector<std::uint8_t> valid{1, 1, 0, 1};
  Tensor probe = testing::random_tensor({1, 4, 8}, rng, -1, 1, false);
  auto loss = [&] { return sum(mul(transformer_layer(x, valid, params), probe)); };
  std::vector<Tensor> leaves{x, params.wq, params.wk, params.bv, params.wo, params.ln1_gain, params.w1, params.b2};
  EXPECT_LT(testing::check_gradients(loss, leaves), 1e-5);
}

TEST_F(LayerFixture, StochasticDepthOnlyInTraining) {
  Tensor x = testing::random_tensor({1, 4, 8}, rng, -1, 1, false);
  std::vector<std::uint8_t> valid(4, 1);
  Tensor eval1 = transformer_layer(x, valid, params, {false, 0.5, &rng, nullptr});
  Tensor eval2 = transformer_layer(x, valid, params, {false, 0.5, nullptr, nullptr});
  EXPECT_TRUE(std::equal(eval1.values().begin(), eval1.values().end(), eval2.values().begin()));
  Rng drop(3);
  bool differs = false;
  for (int trial = 0; trial < 8 && !differs; ++trial) {
    Tensor t = transformer_layer(x, valid, params, {true, 0.5, &drop, nullptr});
    for (std::size_t i = 0; i < t.numel(); ++i) differs |= std::abs(t[i] - eval1[i]) > 1e-9;
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(transformer_layer(x, valid, params, {true, 0.5, nullptr, nullptr}), ContractError);
  Tensor keep_all = transformer_layer(x, valid, params, {true, 1.0, nullptr, nullptr});
  EXPECT_TRUE(std::equal(keep_all.values().begin(), keep_all.values().end(), eval1.values().begin()));
}

TEST(PositionalEncoding, LadderValues) {
  auto pe = sincos_encoding(0, 0, 8);
  EXPECT_EQ(pe, (std::vector<double>{0, 1, 0, 1, 0, 1, 0, 1}));
  pe = sincos_encoding(3, 5, 8);
  EXPECT_DOUBLE_EQ(pe[0], std::sin(3.0));
  EXPECT_DOUBLE_EQ(pe[3], std::cos(3.0 / 100.0));
  EXPECT_DOUBLE_EQ(pe[4], std::sin(5.0));
  EXPECT_DOUBLE_EQ(pe[7], std::cos(5.0 / 100.0));
  EXPECT_EQ(sincos_encoding(2, 7, 16), sincos_encoding(2, 7, 16));
  EXPECT_THROW(sincos_encoding(0, 0, 6), ContractError);
}

TEST(PositionalEncoding, WindowLocalCoordinates) {
  WindowConfig cfg{4, 4, 3};
  std::vector<Coord> coords{{1, 2}, {5, 6}};
  auto set = window_partition(coords, cfg);
  for (const auto& bucket : set.buckets) {
    if (bucket.num_windows() == 0) continue;
    Tensor pe = bucket_positional_encoding(bucket, cfg, {}, 8, PositionalMode::kWindowLocal);
    auto expect = sincos_encoding(1, 2, 8);
    for (std::size_t w = 0; w < bucket.num_windows(); ++w)
      for (std::size_t j = 0; j < 8; ++j) EXPECT_DOUBLE_EQ(pe[w * bucket.capacity * 8 + j], expect[j]);
  }
}

struct BlockFixture : ::testing::Test {
  Rng rng{5};
  ParamStore store;
  WindowConfig window{4, 4, 4};
};

TEST_F(BlockFixture, EmptyInputStaysEmpty) {
  BlockConfig cfg{1, 1, 1.0, 0};
  auto p = make_block_params(store, "b", cfg, 8, 2, 2, rng);
  SparseBEV bev;
  bev.grid = {8, 8};
  bev.features = Tensor::zeros({0, 8});
  SparseBEV out = swformer_block(bev, cfg, window, p);
  EXPECT_TRUE(out.empty());
  EXPECT_EQ(out.grid, bev.grid);
}

TEST_F(BlockFixture, SingleVoxelReducesToOneLayer) {
  BlockConfig cfg{1, 0, 1.0, 0};
  auto p = make_block_params(store, "b", cfg, 8, 2, 2, rng);
  ref::randomize(store, rng);
  SparseBEV bev;
  bev.grid = {8, 8};
  bev.coords = {{6, 3}};
  bev.features = testing::random_tensor({1, 8}, rng, -1, 1, false);
  SparseBEV out = swformer_block(bev, cfg, window, p);
  auto pe = sincos_encoding(2, 3, 8);
  std::vector<double> in(8);
  for (std::size_t j = 0; j < 8; ++j) in[j] = bev.features[j] + pe[j];
  std::vector<std::uint8_t> valid{1};
  Tensor expect = transformer_layer(Tensor({1, 1, 8}, in), valid, p.layers[0]);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_DOUBLE_EQ(out.features[j], expect[j]);
}

TEST_F(BlockFixture, MatchesDenseReference) {
  for (int extra = 0; extra <= 1; ++extra) {
    BlockConfig cfg{1, 1, 1.0, extra};
    ParamStore local;
    auto p = make_block_params(local, "b", cfg, 8, 2, 2, rng);
    ref::randomize(local, rng);
    for (double density : {0.1, 0.4, 0.9}) {
      SparseBEV bev = random_bev(16, 16, density, 8, rng);
      SparseBEV out = swformer_block(bev, cfg, window, p);
      ref::Grid g = ref::to_grid(bev, 8);
      ref::block(g, cfg, window, p);
      EXPECT_LE(ref::max_abs_diff(out, g), 1e-9) << "density " << density << " extra " << extra;
    }
  }
}

TEST_F(BlockFixture, EvalModeIsDeterministic) {
  BlockConfig cfg{2, 2, 0.6, 0};
  auto p = make_block_params(store, "b", cfg, 8, 2, 2, rng);
  SparseBEV bev = random_bev(12, 12, 0.3, 8, rng);
  Rng a(1), b(2);
  SparseBEV x = swformer_block(bev, cfg, window, p, {false, &a});
  SparseBEV y = swformer_block(bev, cfg, window, p, {false, &b});
  EXPECT_TRUE(std::equal(x.features.values().begin(), x.features.values().end(), y.features.values().begin()));
}

TEST_F(BlockFixture, RecorderCapturesEveryBucketAndLayer) {
  BlockConfig cfg{1, 1, 1.0, 0};
  auto p = make_block_params(store, "b", cfg, 8, 2, 2, rng);
  SparseBEV bev = random_bev(8, 8, 0.5, 8, rng);
  AttentionRecorder recorder;
  BlockContext ctx;
  ctx.recorder = &recorder;
  swformer_block(bev, cfg, window, p, ctx);
  std::size_t expected = 0;
  for (ShiftSpec s : {ShiftSpec{}, ShiftSpec::half(window)}) {
    for (const auto& bucket : window_partition(bev.coords, window, s).buckets) expected += bucket.num_windows() > 0;
  }
  ASSERT_EQ(recorder.records.size(), expected);
  for (const auto& r : recorder.records) {
    EXPECT_EQ(r.capture.probs.size(), r.capture.batch * r.capture.heads * r.capture.length * r.capture.length);
    EXPECT_EQ(r.slot_voxel.size(), r.capture.batch * r.capture.length);
  }
}

BackboneConfig small_backbone(std::vector<int> strides) {
  BackboneConfig cfg;
  cfg.strides = std::move(strides);
  cfg.channels = 8;
  cfg.heads = 2;
  cfg.blocks.assign(cfg.strides.size(), BlockConfig{1, 1, 1.0, 0});
  cfg.windows.assign(cfg.strides.size(), WindowConfig{4, 4, 4});
  return cfg;
}

TEST(Backbone, EmptySceneGivesEmptyScales) {
  Rng rng(1);
  ParamStore store;
  auto cfg = small_backbone({1, 2, 4, 16, 32});
  auto p = make_backbone_params(store, cfg, rng);
  SparseBEV bev;
  bev.grid = {32, 32};
  bev.features = Tensor::zeros({0, 8});
  auto pyramid = backbone_forward(bev, cfg, p);
  ASSERT_EQ(pyramid.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_TRUE(pyramid[i].empty());
    EXPECT_EQ(pyramid[i].stride, cfg.strides[i]);
  }
}

TEST(Backbone, SingleVoxelSurvivesEveryScale) {
  Rng rng(2);
  ParamStore store;
  auto cfg = small_backbone({1, 2, 4, 16, 32});
  auto p = make_backbone_params(store, cfg, rng);
  SparseBEV bev;
  bev.grid = {40, 40};
  bev.coords = {{37, 5}};
  bev.features = testing::random_tensor({1, 8}, rng, -1, 1, false);
  auto pyramid = backbone_forward(bev, cfg, p);
  for (const auto& level : pyramid) EXPECT_EQ(level.size(), 1u);
  EXPECT_EQ(pyramid.back().grid, (GridShape{2, 2}));
  EXPECT_EQ(pyramid.back().coords[0], (Coord{1, 0}));
}

TEST(Backbone, OccupancyNonIncreasingAndMatchesDense) {
  Rng rng(3);
  ParamStore store;
  auto cfg = small_backbone({1, 2, 4, 16, 32});
  auto bp = make_backbone_params(store, cfg, rng);
  auto fp = make_fusion_params(store, cfg, rng);
  ref::randomize(store, rng);
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 8 + rng.uniform_int(0, 24);
    SparseBEV bev = random_bev(n, 32 - trial, rng.uniform(0.05, 0.6), 8, rng);
    auto pyramid = backbone_forward(bev, cfg, bp);
    auto fused = fuse_features(pyramid, cfg, fp);
    auto dense = ref::backbone(bev, cfg, bp);
    auto dense_fused = ref::fusion(dense, cfg, fp);
    for (std::size_t i = 0; i < pyramid.size(); ++i) {
      if (i > 0) {
        EXPECT_LE(pyramid[i].size(), pyramid[i - 1].size());
      }
      pyramid[i].validate();
      EXPECT_LE(ref::max_abs_diff(pyramid[i], dense[i]), 1e-9) << "scale " << i;
      EXPECT_LE(ref::max_abs_diff(fused[i], dense_fused[i]), 1e-9) << "fused scale " << i;
      EXPECT_EQ(fused[i].coords, pyramid[i].coords);
    }
  }
}

TEST(Backbone, ConfigValidation) {
  auto cfg = small_backbone({1, 2, 3});
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = small_backbone({1, 2, 4});
  cfg.blocks.pop_back();
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = small_backbone({1, 2, 4});
  cfg.blocks[0].layers_before = 0;
  EXPECT_THROW(cfg.validate(), ContractError);
}

TEST(Backbone, SingleVoxelReachesTopScaleFromAnywhere) {
  Rng rng(4);
  ParamStore store;
  auto cfg = small_backbone({1, 2, 4, 16, 32});
  auto p = make_backbone_params(store, cfg, rng);
  ref::randomize(store, rng);
  SparseBEV bev = random_bev(64, 64, 0.08, 8, rng);
  auto base = backbone_forward(bev, cfg, p).back();
  Tensor bumped = bev.features.detach();
  bumped.mutable_values()[0] += 0.5;
  SparseBEV other = bev;
  other.features = bumped;
  auto moved = backbone_forward(other, cfg, p).back();
  ASSERT_EQ(base.coords, moved.coords);
  ASSERT_GT(base.size(), 1u);
  // Every stride-32 voxel shares one 4x4 window, so all of them must respond.
  for (std::size_t i = 0; i < base.size(); ++i) {
    double diff = 0.0;
    for (std::size_t j = 0; j < 8; ++j) diff += std::abs(base.features.at(i, j) - moved.features.at(i, j));
    EXPECT_GT(diff, 1e-12) << "coarse voxel " << i;
  }
}

TEST(Fusion, SingleScaleIsIdentity) {
  Rng rng(6);
  ParamStore store;
  auto cfg = small_backbone({1});
  auto fp = make_fusion_params(store, cfg, rng);
  EXPECT_TRUE(fp.levels.empty());
  SparseBEV bev = random_bev(8, 8, 0.4, 8, rng);
  auto fused = fuse_features({bev}, cfg, fp);
  ASSERT_EQ(fused.size(), 1u);
  EXPECT_TRUE(fused[0].features.same_as(bev.features));
}

TEST(Fusion, EmptyLevelStaysEmptyAndSparsityIsKept) {
  Rng rng(7);
  ParamStore store;
  auto cfg = small_backbone({1, 2});
  auto fp = make_fusion_params(store, cfg, rng);
  SparseBEV fine = random_bev(8, 8, 0.4, 8, rng);
  fine.stride = 1;
  SparseBEV coarse;
  coarse.stride = 2;
  coarse.grid = {4, 4};
  coarse.features = Tensor::zeros({0, 8});
  auto fused = fuse_features({fine, coarse}, cfg, fp);
  EXPECT_TRUE(fused[1].empty());
  EXPECT_EQ(fused[0].coords, fine.coords);
  SparseBEV empty_fine = fine;
  empty_fine.coords.clear();
  empty_fine.features = Tensor::zeros({0, 8});
  fused = fuse_features({empty_fine, strided_partition(fine, 2)}, cfg, fp);
  EXPECT_TRUE(fused[0].empty());
}

TEST(Fusion, TwoScaleToyMatchesDense) {
  Rng rng(8);
  ParamStore store;
  auto cfg = small_backbone({1, 2});
  auto fp = make_fusion_params(store, cfg, rng);
  ref::randomize(store, rng);
  SparseBEV fine = random_bev(12, 12, 0.3, 8, rng);
  SparseBEV coarse = random_bev(6, 6, 0.5, 8, rng);
  coarse.stride = 2;
  auto fused = fuse_features({fine, coarse}, cfg, fp);
  auto dense = ref::fusion({ref::to_grid(fine, 8), ref::to_grid(coarse, 8)}, cfg, fp);
  EXPECT_LE(ref::max_abs_diff(fused[0], dense[0]), 1e-9);
  EXPECT_LE(ref::max_abs_diff(fused[1], dense[1]), 1e-9);
}

}  // namespace
}  // namespace swformer
