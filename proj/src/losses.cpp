#include "swformer/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "swformer/dual.hpp"
#include "swformer/error.hpp"

namespace swformer {

void LossConfig::validate() const {
  require(focal_epsilon > 0 && alpha > 0 && beta > 0 && seg_focusing > 0 && prob_clamp > 0,
          "focal constants must be positive");
  require(lambda_seg > 0 && lambda_hm > 0 && smooth_l1_beta > 0, "loss weights must be positive");
}

namespace {

void expect_column(const Tensor& t, std::size_t n, const char* what) {
  if (t.numel() != n) throw DimensionError(std::string(what) + ": expected " + std::to_string(n) + " values");
}

}  // namespace

Tensor seg_focal_loss(const Tensor& scores, std::span<const std::uint8_t> labels, const LossConfig& cfg) {
  const std::size_t n = labels.size();
  expect_column(scores, n, "seg_focal_loss");
  if (n == 0) return Tensor::scalar(0.0);
  const double lo = cfg.prob_clamp, hi = 1.0 - cfg.prob_clamp, g = cfg.seg_focusing;
  std::vector<std::uint8_t> y(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(scores[i], lo, hi);
    const double pt = y[i] ? p : 1.0 - p;
    total += -std::pow(1.0 - pt, g) * std::log(pt);
  }
  return record_op({}, {total / static_cast<double>(n)}, {scores},
                   [y = std::move(y), lo, hi, g, n](std::span<const double> gout, auto, GradSink& sink) {
                     auto s = sink.values(0);
                     auto gs = sink.grad(0);
                     for (std::size_t i = 0; i < n; ++i) {
                       if (s[i] < lo || s[i] > hi) continue;
                       const double pt = y[i] ? s[i] : 1.0 - s[i];
                       const double q = 1.0 - pt;
                       // d/dpt of -(q^g) log pt
                       const double d = g * std::pow(q, g - 1.0) * std::log(pt) - std::pow(q, g) / pt;
                       gs[i] += gout[0] * (y[i] ? d : -d) / static_cast<double>(n);
                     }
                   });
}

Tensor heatmap_focal_loss(const Tensor& pred, std::span<const double> target, std::size_t num_boxes,
                          const LossConfig& cfg) {
  const std::size_t n = target.size();
  expect_column(pred, n, "heatmap_focal_loss");
  if (num_boxes == 0 || n == 0) return Tensor::scalar(0.0);
  const double lo = cfg.prob_clamp, hi = 1.0 - cfg.prob_clamp, a = cfg.alpha, b = cfg.beta;
  const double split = 1.0 - cfg.focal_epsilon, norm = static_cast<double>(num_boxes);
  std::vector<double> h(target.begin(), target.end());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(pred[i], lo, hi);
    if (h[i] > split) {
      total -= std::pow(1.0 - p, a) * std::log(p);
    } else {
      total -= std::pow(1.0 - h[i], b) * std::pow(p, a) * std::log(1.0 - p);
    }
  }
  return record_op({}, {total / norm}, {pred},
                   [h = std::move(h), lo, hi, a, b, split, norm, n](std::span<const double> gout, auto, GradSink& sink) {
                     auto v = sink.values(0);
                     auto gp = sink.grad(0);
                     for (std::size_t i = 0; i < n; ++i) {
                       const double p = v[i];
                       if (p < lo || p > hi) continue;
                       double d;
                       if (h[i] > split) {
                         d = a * std::pow(1.0 - p, a - 1.0) * std::log(p) - std::pow(1.0 - p, a) / p;
                       } else {
                         const double w = std::pow(1.0 - h[i], b);
                         d = -w * (a * std::pow(p, a - 1.0) * std::log(1.0 - p) - std::pow(p, a) / (1.0 - p));
                       }
                       gp[i] += gout[0] * d / norm;
                     }
                   });
}

Tensor bin_heading_loss(const Tensor& bin_logits, const Tensor& bin_residuals, std::span<const double> theta,
                        const LossConfig& cfg) {
  const std::size_t n = theta.size();
  if (bin_logits.rank() != 2 || bin_logits.dim(0) != n || bin_residuals.shape() != bin_logits.shape()) {
    throw DimensionError("bin_heading_loss: logits and residuals must be [N, bins]");
  }
  if (n == 0) return Tensor::zeros({0});
  const int bins = static_cast<int>(bin_logits.dim(1));
  std::vector<std::size_t> label(n);
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto code = encode_heading(theta[i], bins);
    label[i] = code.bin;
    residual[i] = code.residual;
  }
  const Tensor ce = softmax_cross_entropy(bin_logits, label);
  const Tensor res = reshape(smooth_l1(pick_per_row(bin_residuals, label), residual, cfg.smooth_l1_beta), {n});
  return add(ce, res);
}

Tensor iou_loss(const Tensor& box, const Tensor& residual, std::span<const double> heading_base, double half_bin,
                std::span<const Box3D> targets) {
  const std::size_t n = targets.size();
  if (box.rank() != 2 || box.dim(0) != n || box.dim(1) != 6 || residual.numel() != n || heading_base.size() != n) {
    throw DimensionError("iou_loss: expected [N, 6] boxes and N residuals");
  }
  using D = Dual<7>;
  std::vector<double> value(n);
  std::vector<std::array<double, 7>> jac(n);
  for (std::size_t i = 0; i < n; ++i) {
    BoxParams<D> p{};
    D* fields[6] = {&p.x, &p.y, &p.z, &p.l, &p.w, &p.h};
    for (std::size_t j = 0; j < 6; ++j) *fields[j] = D::variable(box[i * 6 + j], j);
    p.heading = D(heading_base[i]) + D::variable(residual[i], 6) * D(half_bin);
    const Box3D& t = targets[i];
    // Targets share the predicted frame: offsets relative to the same voxel.
    const BoxParams<D> q{D(t.x), D(t.y), D(t.z), D(t.l), D(t.w), D(t.h), D(t.heading)};
    D iou = iou_3d_generic(p, q);
    value[i] = 1.0 - iou.v;
    for (std::size_t j = 0; j < 7; ++j) jac[i][j] = -iou.d[j];
  }
  return record_op({n}, std::move(value), {box, residual},
                   [jac = std::move(jac), n](std::span<const double> g, auto, GradSink& sink) {
                     if (sink.wants(0)) {
                       auto gb = sink.grad(0);
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < 6; ++j) gb[i * 6 + j] += g[i] * jac[i][j];
                     }
                     if (sink.wants(1)) {
                       auto gr = sink.grad(1);
                       for (std::size_t i = 0; i < n; ++i) gr[i] += g[i] * jac[i][6];
                     }
                   });
}

Tensor box_regression_loss(const HeadOutput& out, const ClassTargets& targets, const HeadConfig& head,
                           const LossConfig& cfg) {
  std::vector<std::int64_t> rows;
  for (std::size_t i = 0; i < targets.active.size(); ++i) {
    if (targets.active[i]) rows.push_back(static_cast<std::int64_t>(i));
  }
  if (rows.empty()) return Tensor::scalar(0.0);
  const std::size_t n = rows.size();
  const Tensor box = gather_rows(out.box, rows);
  const Tensor logits = gather_rows(out.bin_logits, rows);
  const Tensor residuals = gather_rows(out.bin_residuals, rows);

  std::vector<double> target6, theta;
  std::vector<Box3D> goal;
  for (auto r : rows) {
    const Box3D& t = targets.box[static_cast<std::size_t>(r)];
    target6.insert(target6.end(), {t.x, t.y, t.z, t.l, t.w, t.h});
    theta.push_back(t.heading);
    goal.push_back(t);
  }
  Tensor per_row = reshape(matmul(smooth_l1(box, target6, cfg.smooth_l1_beta), Tensor::full({6, 1}, 1.0)), {n});
  per_row = add(per_row, bin_heading_loss(logits, residuals, theta, cfg));
  if (cfg.iou_loss) {
    // IoU of the decoded box: the argmax bin fixes the heading base.
    std::vector<std::size_t> best(n);
    std::vector<double> base(n);
    const std::size_t bins = logits.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = logits.values().subspan(i * bins, bins);
      best[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      base[i] = bin_center(best[i], head.heading_bins);
    }
    per_row = add(per_row, iou_loss(box, pick_per_row(residuals, best), base,
                                    std::numbers::pi / head.heading_bins, goal));
  }
  return mean(per_row);
}

Tensor total_loss(const std::vector<ClassLoss>& parts, const LossConfig& cfg) {
  Tensor total = Tensor::scalar(0.0);
  for (const auto& p : parts) {
    total = add(total, add(add(scale(p.seg, cfg.lambda_seg), scale(p.heatmap, cfg.lambda_hm)), p.box));
  }
  return total;
}

}  // namespace swformer
