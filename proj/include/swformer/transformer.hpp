#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "swformer/ops.hpp"
#include "swformer/params.hpp"
#include "swformer/partition.hpp"

namespace swformer {

// Post-norm transformer layer: multi-head self-attention then a two-layer
// GELU MLP, each followed by a residual sum and layer norm.
struct TransformerLayerParams {
  std::size_t heads = 8;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln1_gain, ln1_bias;
  Tensor w1, b1, w2, b2;
  Tensor ln2_gain, ln2_bias;

  std::size_t channels() const { return wq.dim(0); }
};

TransformerLayerParams make_transformer_layer(ParamStore& store, const std::string& prefix, std::size_t channels,
                                              std::size_t heads, std::size_t mlp_ratio, Rng& rng);

struct LayerContext {
  bool training = false;
  // Residual branches survive with this probability in training mode and are
  // rescaled by 1/survival when kept.
  double survival = 1.0;
  Rng* rng = nullptr;
  AttentionCapture* capture = nullptr;
};

// seq is [windows, length, channels]; `valid` has windows*length flags.
// Padded slots come out as zeros.
Tensor transformer_layer(const Tensor& seq, std::span<const std::uint8_t> valid, const TransformerLayerParams& params,
                         const LayerContext& ctx = {});

enum class PositionalMode {
  kWindowLocal,  // (row, col) inside the window
  kGlobal,       // (row, col) on this scale's BEV grid
};

// Sine/cosine ladder: the first half of the channels encodes row, the second
// half col, interleaved sin/cos with frequencies 1/10000^(2i/(C/2)).
std::vector<double> sincos_encoding(double row, double col, std::size_t channels);

// [windows, capacity, channels] encodings of a bucket; zeros on padding.
Tensor bucket_positional_encoding(const WindowBucket& bucket, const WindowConfig& cfg, ShiftSpec shift,
                                  std::size_t channels, PositionalMode mode);

}  // namespace swformer
