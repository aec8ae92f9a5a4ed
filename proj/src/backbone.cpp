#include "swformer/backbone.hpp"

#include "swformer/error.hpp"

namespace swformer {

void BlockConfig::validate() const {
  require(layers_before >= 1, "block needs at least one layer before the shift");
  require(layers_after >= 0 && extra_shifts >= 0, "layer and shift counts must be non-negative");
  require(survival > 0.0 && survival <= 1.0, "survival probability must lie in (0, 1]");
}

BlockParams make_block_params(ParamStore& store, const std::string& prefix, const BlockConfig& cfg,
                              std::size_t channels, std::size_t heads, std::size_t mlp_ratio, Rng& rng) {
  cfg.validate();
  BlockParams p;
  for (int i = 0; i < cfg.num_layers(); ++i) {
    p.layers.push_back(
        make_transformer_layer(store, prefix + ".layer" + std::to_string(i), channels, heads, mlp_ratio, rng));
  }
  return p;
}

SparseBEV swformer_block(const SparseBEV& bev, const BlockConfig& cfg, const WindowConfig& window,
                         const BlockParams& params, const BlockContext& ctx) {
  cfg.validate();
  require(params.layers.size() == static_cast<std::size_t>(cfg.num_layers()),
          "block parameters do not match the layer count");
  SparseBEV out = bev;
  if (bev.empty()) return out;
  const std::size_t channels = bev.channels();
  if (channels != params.layers.front().channels()) throw DimensionError("swformer_block: channel mismatch");

  struct Stage {
    ShiftSpec shift;
    int layers;
  };
  std::vector<Stage> stages{{{}, cfg.layers_before}};
  bool shifted = false;
  for (int s = 0; s <= cfg.extra_shifts; ++s) {
    shifted = !shifted;
    stages.push_back({shifted ? ShiftSpec::half(window) : ShiftSpec{}, cfg.layers_after});
  }

  Tensor features = bev.features;
  std::size_t layer_index = 0;
  for (const auto& stage : stages) {
    if (stage.layers == 0) continue;
    const BucketedWindowSet set = window_partition(bev.coords, window, stage.shift);
    std::vector<Tensor> outputs;
    std::vector<std::int64_t> inverse(bev.size(), -1);
    std::int64_t row_offset = 0;
    for (std::size_t b = 0; b < set.buckets.size(); ++b) {
      const WindowBucket& bucket = set.buckets[b];
      if (bucket.num_windows() == 0) continue;
      Tensor x = add(gather_bucket(features, bucket),
                     bucket_positional_encoding(bucket, window, stage.shift, channels, ctx.positional));
      for (int l = 0; l < stage.layers; ++l) {
        LayerContext lctx{ctx.training, cfg.survival, ctx.rng, nullptr};
        AttentionRecord* record = nullptr;
        if (ctx.recorder != nullptr) {
          record = &ctx.recorder->records.emplace_back();
          record->stage = ctx.stage;
          record->scale = ctx.scale;
          record->layer = layer_index + static_cast<std::size_t>(l);
          record->bucket = b;
          record->stride = bev.stride;
          for (auto src : bucket.slot_source) {
            record->slot_voxel.push_back(src >= 0 ? bev.coords[static_cast<std::size_t>(src)] : Coord{-1, -1});
          }
          lctx.capture = &record->capture;
        }
        x = transformer_layer(x, bucket.valid, params.layers[layer_index + static_cast<std::size_t>(l)], lctx);
      }
      const std::size_t slots = bucket.slot_source.size();
      outputs.push_back(reshape(x, {slots, channels}));
      for (std::size_t s = 0; s < slots; ++s) {
        if (bucket.slot_source[s] >= 0) inverse[static_cast<std::size_t>(bucket.slot_source[s])] = row_offset + s;
      }
      row_offset += static_cast<std::int64_t>(slots);
    }
    features = gather_rows(concat_rows(outputs), inverse);
    layer_index += static_cast<std::size_t>(stage.layers);
  }
  out.features = features;
  return out;
}

BlockConfig BackboneConfig::block(std::size_t scale) const { return blocks.empty() ? BlockConfig{} : blocks.at(scale); }

WindowConfig BackboneConfig::window(std::size_t scale) const {
  return windows.empty() ? WindowConfig{} : windows.at(scale);
}

BlockConfig BackboneConfig::fusion_block() const { return {1, 1, fusion_survival, 0}; }

void BackboneConfig::validate() const {
  require(!strides.empty() && strides.front() >= 1, "backbone needs at least one positive stride");
  for (std::size_t i = 1; i < strides.size(); ++i) {
    require(strides[i] > strides[i - 1] && strides[i] % strides[i - 1] == 0,
            "strides must increase, each a multiple of the previous");
  }
  require(blocks.empty() || blocks.size() == strides.size(), "one block config per stride");
  require(windows.empty() || windows.size() == strides.size(), "one window config per stride");
  require(heads > 0 && channels % heads == 0, "head count must divide the channel count");
  require(channels % 4 == 0, "channel count must be divisible by 4");
  for (std::size_t i = 0; i < strides.size(); ++i) {
    block(i).validate();
    window(i).validate();
  }
}

BackboneParams make_backbone_params(ParamStore& store, const BackboneConfig& cfg, Rng& rng) {
  cfg.validate();
  BackboneParams p;
  for (std::size_t i = 0; i < cfg.num_scales(); ++i) {
    p.blocks.push_back(make_block_params(store, "backbone.scale" + std::to_string(i), cfg.block(i), cfg.channels,
                                         cfg.heads, cfg.mlp_ratio, rng));
  }
  return p;
}

std::vector<SparseBEV> backbone_forward(const SparseBEV& bev0, const BackboneConfig& cfg,
                                        const BackboneParams& params, BlockContext ctx) {
  cfg.validate();
  require(bev0.stride == cfg.strides.front(), "backbone input stride does not match the first scale");
  require(params.blocks.size() == cfg.num_scales(), "backbone parameters do not match the scale count");
  std::vector<SparseBEV> pyramid;
  ctx.stage = "backbone";
  for (std::size_t i = 0; i < cfg.num_scales(); ++i) {
    ctx.scale = i;
    const SparseBEV input =
        i == 0 ? bev0 : strided_partition(pyramid.back(), cfg.strides[i] / cfg.strides[i - 1]);
    pyramid.push_back(swformer_block(input, cfg.block(i), cfg.window(i), params.blocks[i], ctx));
  }
  return pyramid;
}

FusionParams make_fusion_params(ParamStore& store, const BackboneConfig& cfg, Rng& rng) {
  cfg.validate();
  FusionParams p;
  for (std::size_t i = 0; i + 1 < cfg.num_scales(); ++i) {
    const std::string prefix = "fusion.scale" + std::to_string(i);
    FusionLevelParams level;
    level.proj_weight = store.add_weight(prefix + ".proj.weight", 2 * cfg.channels, cfg.channels, rng);
    level.proj_bias = store.add_constant(prefix + ".proj.bias", {cfg.channels}, 0.0);
    level.block = make_block_params(store, prefix + ".block", cfg.fusion_block(), cfg.channels, cfg.heads,
                                    cfg.mlp_ratio, rng);
    p.levels.push_back(std::move(level));
  }
  return p;
}

std::vector<SparseBEV> fuse_features(const std::vector<SparseBEV>& pyramid, const BackboneConfig& cfg,
                                     const FusionParams& params, BlockContext ctx) {
  if (pyramid.empty()) return {};
  require(params.levels.size() + 1 >= pyramid.size(), "fusion parameters do not cover the pyramid");
  for (std::size_t i = 1; i < pyramid.size(); ++i) {
    require(pyramid[i].stride > pyramid[i - 1].stride && pyramid[i].stride % pyramid[i - 1].stride == 0,
            "pyramid strides are inconsistent");
  }
  std::vector<SparseBEV> fused(pyramid.size());
  fused.back() = pyramid.back();
  ctx.stage = "fusion";
  for (std::size_t i = pyramid.size() - 1; i-- > 0;) {
    ctx.scale = i;
    const SparseBEV& fine = pyramid[i];
    SparseBEV mixed = fine;
    if (!fine.empty()) {
      Tensor up = sparse_upsample(fused[i + 1], fine).features;
      if (fused[i + 1].empty()) up = Tensor::zeros({fine.size(), cfg.channels});
      mixed.features = linear(concat_cols(fine.features, up), params.levels[i].proj_weight,
                              params.levels[i].proj_bias);
    }
    fused[i] = swformer_block(mixed, cfg.fusion_block(), cfg.window(i), params.levels[i].block, ctx);
  }
  return fused;
}

}  // namespace swformer
