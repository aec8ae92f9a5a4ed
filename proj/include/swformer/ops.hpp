#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "swformer/tensor.hpp"

namespace swformer {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

// x[..., C] + bias[C]
Tensor add_bias(const Tensor& x, const Tensor& bias);

// Multiplies each row (last axis) by a constant weight, one per row.
Tensor mul_rows(const Tensor& x, std::span<const double> row_weights);

Tensor matmul(const Tensor& a, const Tensor& b);
// x[N, in] * weight[in, out] + bias[out]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor gelu(const Tensor& x);  // tanh approximation
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

constexpr double kLayerNormEpsilon = 1e-6;

// Normalizes over the last axis, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

// Softmax over the last axis restricted to valid entries. `valid` has either
// one flag per last-axis position (shared by all rows) or one per element.
// Masked entries are exactly 0; a row with no valid entry is all zeros.
Tensor masked_softmax(const Tensor& logits, std::span<const std::uint8_t> valid);

// Attention probabilities observed during a forward pass.
struct AttentionCapture {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::size_t heads = 0;
  std::size_t head_dim = 0;
  std::vector<double> probs;  // [batch, heads, length, length]
  std::vector<double> query;  // [batch, length, channels]
  std::vector<double> key;    // [batch, length, channels]
};

// Multi-head self-attention inside padded windows. q, k, v are
// [batch, length, channels]; `valid` holds batch*length slot flags. Keys of
// padded slots are excluded and padded queries produce zero outputs.
Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::span<const std::uint8_t> valid,
                        std::size_t heads, AttentionCapture* capture = nullptr);

// Rows of a [N, C] tensor by index; index -1 yields a zero row.
Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);

// out[g, c] = max over rows r in group g of x[r, c]. Groups are given in CSR
// form (offsets has groups+1 entries). Ties resolve to the first listed row.
Tensor group_max(const Tensor& x, std::span<const std::size_t> offsets, std::span<const std::int64_t> members);

// out[r] = x[r, column[r]], shape [N, 1].
Tensor pick_per_row(const Tensor& x, std::span<const std::size_t> column);

// Elementwise smooth-L1 of (x - target) with transition `beta`.
Tensor smooth_l1(const Tensor& x, std::span<const double> target, double beta = 1.0);

// Per-row softmax cross-entropy of [N, K] logits against class labels, [N].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace swformer
