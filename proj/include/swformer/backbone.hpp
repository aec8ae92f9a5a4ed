#pragma once

#include <string>
#include <vector>

#include "swformer/partition.hpp"
#include "swformer/transformer.hpp"

namespace swformer {

struct BlockConfig {
  int layers_before = 2;  // N, before the window shift
  int layers_after = 2;   // M, after each shift toggle
  double survival = 0.6;  // stochastic depth, training only
  int extra_shifts = 0;   // further shift toggles appended after the first

  int num_layers() const { return layers_before + layers_after * (1 + extra_shifts); }
  void validate() const;
};

struct BlockParams {
  std::vector<TransformerLayerParams> layers;
};

BlockParams make_block_params(ParamStore& store, const std::string& prefix, const BlockConfig& cfg,
                              std::size_t channels, std::size_t heads, std::size_t mlp_ratio, Rng& rng);

// One attention map per bucket per layer, kept for inspection.
struct AttentionRecord {
  std::string stage;      // "backbone" or "fusion"
  std::size_t scale = 0;  // pyramid level
  std::size_t layer = 0;  // index inside the block
  std::size_t bucket = 0;
  int stride = 1;
  std::vector<Coord> slot_voxel;  // unshifted voxel coordinate per slot (padding repeats {-1,-1})
  AttentionCapture capture;
};

struct AttentionRecorder {
  std::vector<AttentionRecord> records;
};

struct BlockContext {
  bool training = false;
  Rng* rng = nullptr;
  PositionalMode positional = PositionalMode::kWindowLocal;
  AttentionRecorder* recorder = nullptr;
  std::string stage = "backbone";
  std::size_t scale = 0;
};

// Window attention on the unshifted partition, then on the half-window shifted
// partition, with sparse gather-back after each stage. Coordinates, stride and
// grid pass through unchanged.
SparseBEV swformer_block(const SparseBEV& bev, const BlockConfig& cfg, const WindowConfig& window,
                         const BlockParams& params, const BlockContext& ctx = {});

struct BackboneConfig {
  std::vector<int> strides{1, 2, 4, 16, 32};
  std::vector<BlockConfig> blocks;  // one per stride; empty means defaults
  std::vector<WindowConfig> windows;  // one per stride; empty means defaults
  std::size_t channels = 32;
  std::size_t heads = 8;
  std::size_t mlp_ratio = 2;
  double fusion_survival = 0.6;

  std::size_t num_scales() const { return strides.size(); }
  BlockConfig block(std::size_t scale) const;
  WindowConfig window(std::size_t scale) const;
  BlockConfig fusion_block() const;
  void validate() const;
};

struct BackboneParams {
  std::vector<BlockParams> blocks;
};

BackboneParams make_backbone_params(ParamStore& store, const BackboneConfig& cfg, Rng& rng);

// P_0 = block(bev0), P_i = block(strided_partition(P_{i-1})).
std::vector<SparseBEV> backbone_forward(const SparseBEV& bev0, const BackboneConfig& cfg,
                                        const BackboneParams& params, BlockContext ctx = {});

struct FusionLevelParams {
  Tensor proj_weight;  // [2C, C]
  Tensor proj_bias;
  BlockParams block;
};

struct FusionParams {
  std::vector<FusionLevelParams> levels;  // levels[i] fuses scale i, for i < num_scales - 1
};

FusionParams make_fusion_params(ParamStore& store, const BackboneConfig& cfg, Rng& rng);

// Top scale passes through; each lower scale concatenates its features with
// the upsampled fused coarser map, projects 2C to C and runs a one-layer block.
std::vector<SparseBEV> fuse_features(const std::vector<SparseBEV>& pyramid, const BackboneConfig& cfg,
                                     const FusionParams& params, BlockContext ctx = {});

}  // namespace swformer
