#include "swformer/head.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "swformer/error.hpp"

namespace swformer {

void HeadConfig::validate() const {
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  for (int k : kernel) require(k >= 1 && k % 2 == 1, "diffusion kernel must be odd and positive");
  require(delta2 >= 0.0 && delta2 <= delta1 && delta1 <= 1.0, "thresholds must satisfy 0 <= delta2 <= delta1 <= 1");
  require(heading_bins >= 1, "need at least one heading bin");
  refine.validate();
}

HeadParams make_head_params(ParamStore& store, const std::string& prefix, ObjectClass cls, const HeadConfig& cfg,
                            const BackboneConfig& backbone, Rng& rng) {
  cfg.validate();
  const std::size_t ch = backbone.channels;
  HeadParams p;
  p.seg_weight = store.add_weight(prefix + ".seg.weight", ch, 1, rng);
  p.seg_bias = store.add_constant(prefix + ".seg.bias", {1}, 0.0);
  p.refine = make_block_params(store, prefix + ".refine", cfg.refine, ch, backbone.heads, backbone.mlp_ratio, rng);
  p.mlp1_weight = store.add_weight(prefix + ".mlp1.weight", ch, ch, rng);
  p.mlp1_bias = store.add_constant(prefix + ".mlp1.bias", {ch}, 0.0);
  Tensor w2 = store.add_weight(prefix + ".mlp2.weight", ch, cfg.output_width(), rng);
  for (auto& v : w2.mutable_values()) v *= 0.1;
  p.mlp2_weight = w2;
  std::vector<double> bias(cfg.output_width(), 0.0);
  bias[0] = std::log(0.1 / 0.9);
  const std::array<double, 3> size = cls == ObjectClass::kVehicle ? std::array<double, 3>{4.5, 1.95, 1.65}
                                                                  : std::array<double, 3>{0.8, 0.8, 1.75};
  std::copy(size.begin(), size.end(), bias.begin() + 4);
  p.mlp2_bias = store.add(prefix + ".mlp2.bias", Tensor({cfg.output_width()}, std::move(bias)));
  return p;
}

Tensor foreground_segment(const SparseBEV& feat, const HeadParams& params) {
  if (feat.empty()) return Tensor::zeros({0, 1});
  return sigmoid(linear(feat.features, params.seg_weight, params.seg_bias));
}

Diffusion voxel_diffuse(const SparseBEV& feat, const Tensor& scores, double gamma, int kernel) {
  require(kernel >= 1 && kernel % 2 == 1, "diffusion kernel must be odd and positive");
  if (scores.numel() != feat.size()) throw DimensionError("voxel_diffuse: one score per voxel required");
  Diffusion out;
  out.bev.stride = feat.stride;
  out.bev.grid = feat.grid;
  for (std::size_t i = 0; i < feat.size(); ++i) {
    if (scores[i] > gamma) out.kept.push_back(static_cast<std::int64_t>(i));
  }
  const int r = kernel / 2;
  // Covering list per output cell, built on a dense index map.
  std::vector<std::vector<std::int64_t>> covering(std::size_t(feat.grid.rows) * feat.grid.cols);
  for (auto k : out.kept) {
    const Coord c = feat.coords[static_cast<std::size_t>(k)];
    for (int dr = -r; dr <= r; ++dr) {
      for (int dc = -r; dc <= r; ++dc) {
        const Coord n{c.row + dr, c.col + dc};
        if (feat.grid.contains(n)) covering[std::size_t(n.row) * feat.grid.cols + n.col].push_back(k);
      }
    }
  }
  std::vector<std::size_t> offsets{0};
  std::vector<std::int64_t> members;
  for (int row = 0; row < feat.grid.rows; ++row) {
    for (int col = 0; col < feat.grid.cols; ++col) {
      const auto& cover = covering[std::size_t(row) * feat.grid.cols + col];
      if (cover.empty()) continue;
      out.bev.coords.push_back({row, col});
      members.insert(members.end(), cover.begin(), cover.end());
      offsets.push_back(members.size());
    }
  }
  if (out.bev.coords.empty()) {
    out.bev.features = Tensor::zeros({0, feat.channels()});
    out.scores = Tensor::zeros({0, 1});
    return out;
  }
  out.bev.features = group_max(feat.features, offsets, members);
  out.scores = group_max(reshape(scores, {feat.size(), 1}), offsets, members);
  return out;
}

SparseBEV post_diffusion_refine(const SparseBEV& feat, const HeadConfig& cfg, const WindowConfig& window,
                                const HeadParams& params, const BlockContext& ctx) {
  return swformer_block(feat, cfg.refine, window, params.refine, ctx);
}

HeadOutput head_forward(const SparseBEV& feat, const HeadConfig& cfg, const HeadParams& params) {
  const std::size_t width = cfg.output_width(), bins = static_cast<std::size_t>(cfg.heading_bins);
  HeadOutput out;
  if (feat.empty()) {
    out.raw = Tensor::zeros({0, width});
  } else {
    const Tensor hidden = gelu(linear(feat.features, params.mlp1_weight, params.mlp1_bias));
    out.raw = linear(hidden, params.mlp2_weight, params.mlp2_bias);
  }
  out.heatmap = sigmoid(slice_cols(out.raw, 0, 1));
  out.box = slice_cols(out.raw, 1, 6);
  out.bin_logits = slice_cols(out.raw, 7, bins);
  out.bin_residuals = slice_cols(out.raw, 7 + bins, bins);
  return out;
}

double bin_center(std::size_t bin, int bins) {
  const double width = 2.0 * std::numbers::pi / bins;
  return -std::numbers::pi + (static_cast<double>(bin) + 0.5) * width;
}

HeadingCode encode_heading(double theta, int bins) {
  const double wrapped = wrap_angle(theta);
  const double width = 2.0 * std::numbers::pi / bins;
  auto bin = static_cast<std::ptrdiff_t>(std::floor((wrapped + std::numbers::pi) / width));
  bin = std::clamp<std::ptrdiff_t>(bin, 0, bins - 1);
  const auto b = static_cast<std::size_t>(bin);
  return {b, (wrapped - bin_center(b, bins)) / (0.5 * width)};
}

double decode_heading(std::size_t bin, double residual, int bins) {
  return wrap_angle(bin_center(bin, bins) + residual * std::numbers::pi / bins);
}

}  // namespace swformer
