#include "swformer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "swformer/error.hpp"

namespace swformer {

namespace {

void expect_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void expect_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

std::size_t last_dim(const Tensor& t) { return t.rank() == 0 ? 1 : t.shape().back(); }

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  return record_op(x.shape(), std::move(out), {x},
                   [deriv](std::span<const double> g, std::span<const double> y, GradSink& sink) {
                     auto xs = sink.values(0);
                     auto gx = sink.grad(0);
                     for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xs[i], y[i]);
                   });
}

constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return record_op(a.shape(), std::move(out), {a, b}, [](std::span<const double> g, auto, GradSink& sink) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!sink.wants(k)) continue;
      auto gk = sink.grad(k);
      for (std::size_t i = 0; i < g.size(); ++i) gk[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return record_op(a.shape(), std::move(out), {a, b}, [](std::span<const double> g, auto, GradSink& sink) {
    if (sink.wants(0)) {
      auto ga = sink.grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (sink.wants(1)) {
      auto gb = sink.grad(1);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return record_op(a.shape(), std::move(out), {a, b}, [](std::span<const double> g, auto, GradSink& sink) {
    auto av = sink.values(0);
    auto bv = sink.values(1);
    if (sink.wants(0)) {
      auto ga = sink.grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (sink.wants(1)) {
      auto gb = sink.grad(1);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return record_op(a.shape(), std::move(out), {a}, [factor](std::span<const double> g, auto, GradSink& sink) {
    auto ga = sink.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Tensor add_scalar(const Tensor& a, double offset) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + offset;
  return record_op(a.shape(), std::move(out), {a}, [](std::span<const double> g, auto, GradSink& sink) {
    auto ga = sink.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t c = last_dim(x);
  if (bias.numel() != c || bias.rank() != 1) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " for input " + shape_str(x.shape()));
  }
  std::vector<double> out(x.numel());
  auto xv = x.values();
  auto bv = bias.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + bv[i % c];
  return record_op(x.shape(), std::move(out), {x, bias}, [c](std::span<const double> g, auto, GradSink& sink) {
    if (sink.wants(0)) {
      auto gx = sink.grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (sink.wants(1)) {
      auto gb = sink.grad(1);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % c] += g[i];
    }
  });
}

Tensor mul_rows(const Tensor& x, std::span<const double> row_weights) {
  const std::size_t c = last_dim(x);
  const std::size_t rows = c == 0 ? 0 : x.numel() / c;
  if (row_weights.size() != rows) {
    throw DimensionError("mul_rows: " + std::to_string(row_weights.size()) + " weights for " + std::to_string(rows) +
                         " rows");
  }
  std::vector<double> w(row_weights.begin(), row_weights.end());
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = xv[r * c + j] * w[r];
  return record_op(x.shape(), std::move(out), {x},
                   [w = std::move(w), c](std::span<const double> g, auto, GradSink& sink) {
                     auto gx = sink.grad(0);
                     for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * w[i / c];
                   });
}

namespace {

// out[m, n] += a[m, k] * b[k, n]. Zero entries of a are skipped, which makes
// padded rows free.
void matmul_accumulate(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
                       std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
}

// Gradients of out = a * b for inputs 0 (a) and 1 (b) of the sink.
void matmul_backward(std::span<const double> g, GradSink& sink, std::size_t m, std::size_t k, std::size_t n) {
  auto av = sink.values(0);
  auto bv = sink.values(1);
  if (sink.wants(0)) {
    std::vector<double> bt(n * k);
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = bv[p * n + j];
    matmul_accumulate(g.data(), bt.data(), sink.grad(0).data(), m, n, k);
  }
  if (sink.wants(1)) {
    auto gb = sink.grad(1);
    for (std::size_t i = 0; i < m; ++i) {
      const double* grow = g.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = av[i * k + p];
        if (aip == 0.0) continue;
        double* gbrow = gb.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  expect_rank(a, 2, "matmul");
  expect_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  auto av = a.values();
  auto bv = b.values();
  matmul_accumulate(av.data(), bv.data(), out.data(), m, k, n);
  return record_op({m, n}, std::move(out), {a, b}, [m, k, n](std::span<const double> g, auto, GradSink& sink) {
    matmul_backward(g, sink, m, k, n);
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  expect_rank(x, 2, "linear");
  expect_rank(weight, 2, "linear");
  const std::size_t m = x.dim(0), k = x.dim(1), n = weight.dim(1);
  if (weight.dim(0) != k) {
    throw DimensionError("linear: inner dimensions " + shape_str(x.shape()) + " x " + shape_str(weight.shape()));
  }
  if (bias.numel() != n) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " for " + std::to_string(n) + " outputs");
  }
  std::vector<double> out(m * n);
  auto bias_v = bias.values();
  for (std::size_t i = 0; i < m; ++i) std::copy(bias_v.begin(), bias_v.end(), out.begin() + i * n);
  matmul_accumulate(x.values().data(), weight.values().data(), out.data(), m, k, n);
  return record_op({m, n}, std::move(out), {x, weight, bias}, [m, k, n](std::span<const double> g, auto, GradSink& sink) {
    matmul_backward(g, sink, m, k, n);
    if (sink.wants(2)) {
      auto gb = sink.grad(2);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
}


Tensor gelu(const Tensor& x) {
  return unary(
      x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(kGeluScale * (v + kGeluCubic * v * v * v))); },
      [](double v, double) {
        const double t = std::tanh(kGeluScale * (v + kGeluCubic * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluScale * (1.0 + 3.0 * kGeluCubic * v * v);
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return record_op(Shape{}, {acc}, {x}, [](std::span<const double> g, auto, GradSink& sink) {
    auto gx = sink.grad(0);
    for (auto& v : gx) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) return Tensor::scalar(0.0);
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return record_op(std::move(shape), std::move(out), {x}, [](std::span<const double> g, auto, GradSink& sink) {
    auto gx = sink.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  const std::size_t c = last_dim(x);
  if (gain.numel() != c || bias.numel() != c) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + " for input " + shape_str(x.shape()));
  }
  const std::size_t rows = c == 0 ? 0 : x.numel() / c;
  auto xv = x.values();
  auto gv = gain.values();
  auto bv = bias.values();
  auto normed = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double xh = (row[j] - mu) * is;
      (*normed)[r * c + j] = xh;
      out[r * c + j] = gv[j] * xh + bv[j];
    }
  }
  return record_op(x.shape(), std::move(out), {x, gain, bias},
                   [normed, inv_std, c, rows](std::span<const double> g, auto, GradSink& sink) {
                     const auto& xh = *normed;
                     auto gv = sink.values(1);
                     if (sink.wants(1)) {
                       auto gg = sink.grad(1);
                       for (std::size_t i = 0; i < g.size(); ++i) gg[i % c] += g[i] * xh[i];
                     }
                     if (sink.wants(2)) {
                       auto gb = sink.grad(2);
                       for (std::size_t i = 0; i < g.size(); ++i) gb[i % c] += g[i];
                     }
                     if (!sink.wants(0)) return;
                     auto gx = sink.grad(0);
                     const double inv_c = 1.0 / static_cast<double>(c);
                     for (std::size_t r = 0; r < rows; ++r) {
                       double mean_d = 0.0, mean_dx = 0.0;
                       for (std::size_t j = 0; j < c; ++j) {
                         const double d = g[r * c + j] * gv[j];
                         mean_d += d;
                         mean_dx += d * xh[r * c + j];
                       }
                       mean_d *= inv_c;
                       mean_dx *= inv_c;
                       for (std::size_t j = 0; j < c; ++j) {
                         const double d = g[r * c + j] * gv[j];
                         gx[r * c + j] += (*inv_std)[r] * (d - mean_d - xh[r * c + j] * mean_dx);
                       }
                     }
                   });
}

Tensor masked_softmax(const Tensor& logits, std::span<const std::uint8_t> valid) {
  const std::size_t len = last_dim(logits);
  const std::size_t rows = len == 0 ? 0 : logits.numel() / len;
  const bool shared = valid.size() == len;
  if (!shared && valid.size() != logits.numel()) {
    throw DimensionError("masked_softmax: mask of " + std::to_string(valid.size()) + " for logits " +
                         shape_str(logits.shape()));
  }
  auto lv = logits.values();
  std::vector<double> out(logits.numel(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint8_t* m = shared ? valid.data() : valid.data() + r * len;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < len; ++j)
      if (m[j]) peak = std::max(peak, lv[r * len + j]);
    if (peak == -std::numeric_limits<double>::infinity()) continue;
    double total = 0.0;
    for (std::size_t j = 0; j < len; ++j)
      if (m[j]) total += (out[r * len + j] = std::exp(lv[r * len + j] - peak));
    for (std::size_t j = 0; j < len; ++j) out[r * len + j] /= total;
  }
  return record_op(logits.shape(), std::move(out), {logits},
                   [len, rows](std::span<const double> g, std::span<const double> y, GradSink& sink) {
                     auto gx = sink.grad(0);
                     for (std::size_t r = 0; r < rows; ++r) {
                       double dot = 0.0;
                       for (std::size_t j = 0; j < len; ++j) dot += g[r * len + j] * y[r * len + j];
                       for (std::size_t j = 0; j < len; ++j)
                         gx[r * len + j] += y[r * len + j] * (g[r * len + j] - dot);
                     }
                   });
}

Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::span<const std::uint8_t> valid,
                        std::size_t heads, AttentionCapture* capture) {
  expect_rank(q, 3, "masked_attention");
  expect_same_shape(q, k, "masked_attention");
  expect_same_shape(q, v, "masked_attention");
  const std::size_t batch = q.dim(0), len = q.dim(1), ch = q.dim(2);
  if (heads == 0 || ch % heads != 0) {
    throw DimensionError("masked_attention: " + std::to_string(heads) + " heads for " + std::to_string(ch) +
                         " channels");
  }
  if (valid.size() != batch * len) {
    throw DimensionError("masked_attention: mask of " + std::to_string(valid.size()) + " for " +
                         shape_str(q.shape()));
  }
  const std::size_t hd = ch / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  auto qv = q.values();
  auto kv = k.values();
  auto vv = v.values();
  auto probs = std::make_shared<std::vector<double>>(batch * heads * len * len, 0.0);
  auto mask = std::make_shared<std::vector<std::uint8_t>>(valid.begin(), valid.end());
  std::vector<double> out(q.numel(), 0.0);
  std::vector<double> scores(len);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::uint8_t* m = mask->data() + b * len;
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < len; ++i) {
        if (!m[i]) continue;
        const double* qi = qv.data() + (b * len + i) * ch + h * hd;
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < len; ++j) {
          if (!m[j]) continue;
          const double* kj = kv.data() + (b * len + j) * ch + h * hd;
          double s = 0.0;
          for (std::size_t d = 0; d < hd; ++d) s += qi[d] * kj[d];
          scores[j] = s * inv_sqrt;
          peak = std::max(peak, scores[j]);
        }
        double* p = probs->data() + ((b * heads + h) * len + i) * len;
        double total = 0.0;
        for (std::size_t j = 0; j < len; ++j)
          if (m[j]) total += (p[j] = std::exp(scores[j] - peak));
        double* oi = out.data() + (b * len + i) * ch + h * hd;
        for (std::size_t j = 0; j < len; ++j) {
          if (!m[j]) continue;
          p[j] /= total;
          const double* vj = vv.data() + (b * len + j) * ch + h * hd;
          for (std::size_t d = 0; d < hd; ++d) oi[d] += p[j] * vj[d];
        }
      }
    }
  }
  if (capture != nullptr) {
    capture->batch = batch;
    capture->length = len;
    capture->heads = heads;
    capture->head_dim = hd;
    capture->probs = *probs;
    capture->query.assign(qv.begin(), qv.end());
    capture->key.assign(kv.begin(), kv.end());
  }
  return record_op(
      q.shape(), std::move(out), {q, k, v},
      [probs, mask, batch, len, ch, heads, hd, inv_sqrt](std::span<const double> g, auto, GradSink& sink) {
        auto qv = sink.values(0);
        auto kv = sink.values(1);
        auto vv = sink.values(2);
        std::vector<double> gq(qv.size(), 0.0), gk(kv.size(), 0.0), gvv(vv.size(), 0.0);
        std::vector<double> dp(len);
        for (std::size_t b = 0; b < batch; ++b) {
          const std::uint8_t* m = mask->data() + b * len;
          for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t i = 0; i < len; ++i) {
              if (!m[i]) continue;
              const double* p = probs->data() + ((b * heads + h) * len + i) * len;
              const double* gi = g.data() + (b * len + i) * ch + h * hd;
              double dot = 0.0;
              for (std::size_t j = 0; j < len; ++j) {
                if (!m[j]) continue;
                const double* vj = vv.data() + (b * len + j) * ch + h * hd;
                double* gvj = gvv.data() + (b * len + j) * ch + h * hd;
                double s = 0.0;
                for (std::size_t d = 0; d < hd; ++d) {
                  s += gi[d] * vj[d];
                  gvj[d] += p[j] * gi[d];
                }
                dp[j] = s;
                dot += p[j] * s;
              }
              const double* qi = qv.data() + (b * len + i) * ch + h * hd;
              double* gqi = gq.data() + (b * len + i) * ch + h * hd;
              for (std::size_t j = 0; j < len; ++j) {
                if (!m[j]) continue;
                const double ds = p[j] * (dp[j] - dot) * inv_sqrt;
                const double* kj = kv.data() + (b * len + j) * ch + h * hd;
                double* gkj = gk.data() + (b * len + j) * ch + h * hd;
                for (std::size_t d = 0; d < hd; ++d) {
                  gqi[d] += ds * kj[d];
                  gkj[d] += ds * qi[d];
                }
              }
            }
          }
        }
        const std::vector<double>* parts[3] = {&gq, &gk, &gvv};
        for (std::size_t t = 0; t < 3; ++t) {
          if (!sink.wants(t)) continue;
          auto dst = sink.grad(t);
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += (*parts[t])[i];
        }
      });
}

Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index) {
  expect_rank(x, 2, "gather_rows");
  const std::size_t n = x.dim(0), c = x.dim(1);
  std::vector<std::int64_t> idx(index.begin(), index.end());
  std::vector<double> out(idx.size() * c, 0.0);
  auto xv = x.values();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0) continue;
    if (static_cast<std::size_t>(idx[r]) >= n) {
      throw DimensionError("gather_rows: index " + std::to_string(idx[r]) + " out of range " + std::to_string(n));
    }
    std::copy_n(xv.data() + idx[r] * c, c, out.data() + r * c);
  }
  const std::size_t m = idx.size();
  return record_op({m, c}, std::move(out), {x}, [idx = std::move(idx), c](std::span<const double> g, auto, GradSink& sink) {
    auto gx = sink.grad(0);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] < 0) continue;
      for (std::size_t j = 0; j < c; ++j) gx[idx[r] * c + j] += g[r * c + j];
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const std::size_t c = parts.front().rank() == 2 ? parts.front().dim(1) : 0;
  std::size_t rows = 0;
  std::vector<std::size_t> starts;
  for (const auto& p : parts) {
    expect_rank(p, 2, "concat_rows");
    if (p.dim(1) != c) throw DimensionError("concat_rows: column mismatch " + shape_str(p.shape()));
    starts.push_back(rows * c);
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * c);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return record_op({rows, c}, std::move(out), parts,
                   [starts = std::move(starts)](std::span<const double> g, auto, GradSink& sink) {
                     for (std::size_t t = 0; t < starts.size(); ++t) {
                       if (!sink.wants(t)) continue;
                       auto gt = sink.grad(t);
                       for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += g[starts[t] + i];
                     }
                   });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  expect_rank(a, 2, "concat_cols");
  expect_rank(b, 2, "concat_cols");
  if (a.dim(0) != b.dim(0)) {
    throw DimensionError("concat_cols: rows " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), c = ca + cb;
  std::vector<double> out(n * c);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(a.values().data() + r * ca, ca, out.data() + r * c);
    std::copy_n(b.values().data() + r * cb, cb, out.data() + r * c + ca);
  }
  return record_op({n, c}, std::move(out), {a, b}, [n, ca, cb, c](std::span<const double> g, auto, GradSink& sink) {
    if (sink.wants(0)) {
      auto ga = sink.grad(0);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < ca; ++j) ga[r * ca + j] += g[r * c + j];
    }
    if (sink.wants(1)) {
      auto gb = sink.grad(1);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < cb; ++j) gb[r * cb + j] += g[r * c + ca + j];
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  expect_rank(x, 2, "slice_cols");
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (start + count > c) throw DimensionError("slice_cols: range exceeds " + shape_str(x.shape()));
  std::vector<double> out(n * count);
  for (std::size_t r = 0; r < n; ++r) std::copy_n(x.values().data() + r * c + start, count, out.data() + r * count);
  return record_op({n, count}, std::move(out), {x}, [n, c, start, count](std::span<const double> g, auto, GradSink& sink) {
    auto gx = sink.grad(0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < count; ++j) gx[r * c + start + j] += g[r * count + j];
  });
}

Tensor group_max(const Tensor& x, std::span<const std::size_t> offsets, std::span<const std::int64_t> members) {
  expect_rank(x, 2, "group_max");
  if (offsets.empty() || offsets.back() != members.size()) {
    throw ContractError("group_max: malformed group offsets");
  }
  const std::size_t groups = offsets.size() - 1, n = x.dim(0), c = x.dim(1);
  auto xv = x.values();
  std::vector<std::int64_t> arg(groups * c, -1);
  std::vector<double> out(groups * c, 0.0);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    if (offsets[gi] == offsets[gi + 1]) throw ContractError("group_max: empty group");
    for (std::size_t m = offsets[gi]; m < offsets[gi + 1]; ++m) {
      const auto r = members[m];
      if (r < 0 || static_cast<std::size_t>(r) >= n) throw DimensionError("group_max: member out of range");
      for (std::size_t j = 0; j < c; ++j) {
        const double val = xv[r * c + j];
        auto& a = arg[gi * c + j];
        if (a < 0 || val > out[gi * c + j]) {
          a = r;
          out[gi * c + j] = val;
        }
      }
    }
  }
  return record_op({groups, c}, std::move(out), {x}, [arg = std::move(arg), c](std::span<const double> g, auto, GradSink& sink) {
    auto gx = sink.grad(0);
    for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i] * c + i % c] += g[i];
  });
}

Tensor pick_per_row(const Tensor& x, std::span<const std::size_t> column) {
  expect_rank(x, 2, "pick_per_row");
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (column.size() != n) throw DimensionError("pick_per_row: column count mismatch");
  std::vector<std::size_t> cols(column.begin(), column.end());
  std::vector<double> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (cols[r] >= c) throw DimensionError("pick_per_row: column out of range");
    out[r] = x.values()[r * c + cols[r]];
  }
  return record_op({n, 1}, std::move(out), {x}, [cols = std::move(cols), c](std::span<const double> g, auto, GradSink& sink) {
    auto gx = sink.grad(0);
    for (std::size_t r = 0; r < cols.size(); ++r) gx[r * c + cols[r]] += g[r];
  });
}

Tensor smooth_l1(const Tensor& x, std::span<const double> target, double beta) {
  if (target.size() != x.numel()) throw DimensionError("smooth_l1: target size mismatch");
  std::vector<double> diff(x.numel());
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = x[i] - target[i];
    diff[i] = d;
    const double a = std::abs(d);
    out[i] = a < beta ? 0.5 * d * d / beta : a - 0.5 * beta;
  }
  return record_op(x.shape(), std::move(out), {x}, [diff = std::move(diff), beta](std::span<const double> g, auto, GradSink& sink) {
    auto gx = sink.grad(0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double d = diff[i];
      gx[i] += g[i] * (std::abs(d) < beta ? d / beta : (d > 0 ? 1.0 : -1.0));
    }
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  expect_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) throw DimensionError("softmax_cross_entropy: label count mismatch");
  auto lv = logits.values();
  auto probs = std::make_shared<std::vector<double>>(n * k);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  std::vector<double> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (lab[r] >= k) throw DimensionError("softmax_cross_entropy: label out of range");
    const double* row = lv.data() + r * k;
    const double peak = *std::max_element(row, row + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(row[j] - peak);
    for (std::size_t j = 0; j < k; ++j) (*probs)[r * k + j] = std::exp(row[j] - peak) / total;
    out[r] = peak + std::log(total) - row[lab[r]];
  }
  return record_op({n}, std::move(out), {logits}, [probs, lab = std::move(lab), k](std::span<const double> g, auto, GradSink& sink) {
    auto gx = sink.grad(0);
    for (std::size_t r = 0; r < lab.size(); ++r)
      for (std::size_t j = 0; j < k; ++j)
        gx[r * k + j] += g[r] * ((*probs)[r * k + j] - (j == lab[r] ? 1.0 : 0.0));
  });
}

}  // namespace swformer
