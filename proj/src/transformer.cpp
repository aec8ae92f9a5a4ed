#include "swformer/transformer.hpp"

#include <cmath>

#include "swformer/error.hpp"

namespace swformer {

TransformerLayerParams make_transformer_layer(ParamStore& store, const std::string& prefix, std::size_t channels,
                                              std::size_t heads, std::size_t mlp_ratio, Rng& rng) {
  require(heads > 0 && channels % heads == 0, "head count must divide the channel count");
  TransformerLayerParams p;
  p.heads = heads;
  const std::size_t hidden = channels * mlp_ratio;
  p.wq = store.add_weight(prefix + ".attn.wq", channels, channels, rng);
  p.bq = store.add_constant(prefix + ".attn.bq", {channels}, 0.0);
  p.wk = store.add_weight(prefix + ".attn.wk", channels, channels, rng);
  p.bk = store.add_constant(prefix + ".attn.bk", {channels}, 0.0);
  p.wv = store.add_weight(prefix + ".attn.wv", channels, channels, rng);
  p.bv = store.add_constant(prefix + ".attn.bv", {channels}, 0.0);
  p.wo = store.add_weight(prefix + ".attn.wo", channels, channels, rng);
  p.bo = store.add_constant(prefix + ".attn.bo", {channels}, 0.0);
  p.ln1_gain = store.add_constant(prefix + ".ln1.gain", {channels}, 1.0);
  p.ln1_bias = store.add_constant(prefix + ".ln1.bias", {channels}, 0.0);
  p.w1 = store.add_weight(prefix + ".mlp.w1", channels, hidden, rng);
  p.b1 = store.add_constant(prefix + ".mlp.b1", {hidden}, 0.0);
  p.w2 = store.add_weight(prefix + ".mlp.w2", hidden, channels, rng);
  p.b2 = store.add_constant(prefix + ".mlp.b2", {channels}, 0.0);
  p.ln2_gain = store.add_constant(prefix + ".ln2.gain", {channels}, 1.0);
  p.ln2_bias = store.add_constant(prefix + ".ln2.bias", {channels}, 0.0);
  return p;
}

Tensor transformer_layer(const Tensor& seq, std::span<const std::uint8_t> valid, const TransformerLayerParams& params,
                         const LayerContext& ctx) {
  if (seq.rank() != 3 || seq.dim(2) != params.channels()) {
    throw DimensionError("transformer_layer: input " + shape_str(seq.shape()) + " for " +
                         std::to_string(params.channels()) + " channels");
  }
  const std::size_t windows = seq.dim(0), len = seq.dim(1), ch = seq.dim(2);
  if (valid.size() != windows * len) throw DimensionError("transformer_layer: mask length mismatch");
  const Shape seq_shape = seq.shape();
  const Tensor rows = reshape(seq, {windows * len, ch});

  auto branch_scale = [&]() -> double {
    if (!ctx.training || ctx.survival >= 1.0) return 1.0;
    if (ctx.rng == nullptr) throw ContractError("stochastic depth needs a random generator");
    return ctx.rng->bernoulli(ctx.survival) ? 1.0 / ctx.survival : 0.0;
  };

  const Tensor q = reshape(linear(rows, params.wq, params.bq), seq_shape);
  const Tensor k = reshape(linear(rows, params.wk, params.bk), seq_shape);
  const Tensor v = reshape(linear(rows, params.wv, params.bv), seq_shape);
  const Tensor attn = masked_attention(q, k, v, valid, params.heads, ctx.capture);
  Tensor msa = linear(reshape(attn, {windows * len, ch}), params.wo, params.bo);
  Tensor hidden = rows;
  if (const double s = branch_scale(); s != 0.0) hidden = add(hidden, s == 1.0 ? msa : scale(msa, s));
  hidden = layer_norm(hidden, params.ln1_gain, params.ln1_bias);

  Tensor mlp = linear(gelu(linear(hidden, params.w1, params.b1)), params.w2, params.b2);
  Tensor out = hidden;
  if (const double s = branch_scale(); s != 0.0) out = add(out, s == 1.0 ? mlp : scale(mlp, s));
  out = layer_norm(out, params.ln2_gain, params.ln2_bias);

  std::vector<double> keep(valid.begin(), valid.end());
  return reshape(mul_rows(out, keep), seq_shape);
}

std::vector<double> sincos_encoding(double row, double col, std::size_t channels) {
  require(channels % 4 == 0, "positional encoding needs a channel count divisible by 4");
  const std::size_t half = channels / 2;
  std::vector<double> out(channels);
  for (std::size_t axis = 0; axis < 2; ++axis) {
    const double pos = axis == 0 ? row : col;
    for (std::size_t i = 0; i < half / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(half));
      out[axis * half + 2 * i] = std::sin(pos * freq);
      out[axis * half + 2 * i + 1] = std::cos(pos * freq);
    }
  }
  return out;
}

Tensor bucket_positional_encoding(const WindowBucket& bucket, const WindowConfig& cfg, ShiftSpec shift,
                                  std::size_t channels, PositionalMode mode) {
  const std::size_t slots = bucket.slot_source.size();
  std::vector<double> values(slots * channels, 0.0);
  for (std::size_t s = 0; s < slots; ++s) {
    if (!bucket.valid[s]) continue;
    const Coord c = bucket.slot_coord[s];
    std::vector<double> pe;
    if (mode == PositionalMode::kWindowLocal) {
      const int r = ((c.row % cfg.height) + cfg.height) % cfg.height;
      const int k = ((c.col % cfg.width) + cfg.width) % cfg.width;
      pe = sincos_encoding(r, k, channels);
    } else {
      pe = sincos_encoding(c.row - shift.row, c.col - shift.col, channels);
    }
    std::copy(pe.begin(), pe.end(), values.begin() + static_cast<std::ptrdiff_t>(s * channels));
  }
  return Tensor({bucket.num_windows(), static_cast<std::size_t>(bucket.capacity), channels}, std::move(values));
}

}  // namespace swformer
