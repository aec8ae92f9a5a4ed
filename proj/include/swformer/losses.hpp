#pragma once

#include <span>
#include <vector>

#include "swformer/head.hpp"
#include "swformer/targets.hpp"

namespace swformer {

struct LossConfig {
  double focal_epsilon = 1e-3;  // positive split at h > 1 - epsilon
  double alpha = 2.0;
  double beta = 4.0;
  double seg_focusing = 2.0;
  double prob_clamp = 1e-7;
  double lambda_seg = 200.0;
  double lambda_hm = 10.0;
  double smooth_l1_beta = 1.0;
  bool iou_loss = true;

  void validate() const;
};

// Mean over voxels of -(1 - p_t)^gamma log p_t, p_t the probability of the
// label. Zero voxels give 0.
Tensor seg_focal_loss(const Tensor& scores, std::span<const std::uint8_t> labels, const LossConfig& cfg);

// Penalty-reduced focal loss summed over voxels and divided by the box count;
// no boxes gives 0.
Tensor heatmap_focal_loss(const Tensor& pred, std::span<const double> target, std::size_t num_boxes,
                          const LossConfig& cfg);

// Per-row cross-entropy over bins plus smooth-L1 between the residual of the
// true bin and its target, [N].
Tensor bin_heading_loss(const Tensor& bin_logits, const Tensor& bin_residuals, std::span<const double> theta,
                        const LossConfig& cfg);

// Per-row 1 - IoU3D of predicted boxes against targets, both given as
// dx, dy, dz, l, w, h in a common frame; `heading_base` is the chosen bin center and `residual` [N, 1] its scaled
// offset, so heading = base + residual * half_bin.
Tensor iou_loss(const Tensor& box, const Tensor& residual, std::span<const double> heading_base, double half_bin,
                std::span<const Box3D> targets);

// Mean over active voxels of smooth-L1 on the six box values, the bin loss
// and the IoU loss. Predicted and target boxes share the voxel-center frame,
// which leaves IoU unchanged relative to the decoded world boxes.
Tensor box_regression_loss(const HeadOutput& out, const ClassTargets& targets, const HeadConfig& head,
                           const LossConfig& cfg);

struct ClassLoss {
  Tensor seg = Tensor::scalar(0.0);
  Tensor heatmap = Tensor::scalar(0.0);
  Tensor box = Tensor::scalar(0.0);
};

// Sum over classes of lambda_seg * seg + lambda_hm * heatmap + box.
Tensor total_loss(const std::vector<ClassLoss>& parts, const LossConfig& cfg);

}  // namespace swformer
