#pragma once

#include <array>
#include <string>
#include <vector>

#include "swformer/backbone.hpp"
#include "swformer/geometry.hpp"

namespace swformer {

struct HeadConfig {
  double gamma = 0.05;                         // foreground cutoff before diffusion
  std::array<int, kNumClasses> kernel{5, 5};   // diffusion window per class
  double delta1 = 0.2;                         // regression gate on groundtruth heatmap
  double delta2 = 0.1;                         // decode cutoff on predicted heatmap
  std::array<std::size_t, kNumClasses> target_cap{1024, 800};
  std::array<std::size_t, kNumClasses> scale{0, 0};  // fused pyramid level per class
  int heading_bins = 12;
  std::size_t min_points = 5;   // boxes with fewer interior points are ignored
  double min_overlap = 0.7;     // Gaussian radius construction
  BlockConfig refine{1, 1, 0.6, 0};

  // Columns of the raw head output: heatmap logit, 6 box values, bin logits,
  // bin residuals.
  std::size_t output_width() const { return 7 + 2 * static_cast<std::size_t>(heading_bins); }
  void validate() const;
};

struct HeadParams {
  Tensor seg_weight, seg_bias;  // [C, 1], [1]
  BlockParams refine;
  Tensor mlp1_weight, mlp1_bias;  // [C, C]
  Tensor mlp2_weight, mlp2_bias;  // [C, output_width]
};

// Heatmap bias starts at the logit of 0.1; size biases start at a typical
// box of the class.
HeadParams make_head_params(ParamStore& store, const std::string& prefix, ObjectClass cls, const HeadConfig& cfg,
                            const BackboneConfig& backbone, Rng& rng);

// Per-voxel sigmoid score, [V, 1].
Tensor foreground_segment(const SparseBEV& feat, const HeadParams& params);

struct Diffusion {
  SparseBEV bev;                     // union of k x k neighborhoods of kept voxels
  Tensor scores;                     // pooled segmentation scores, [V', 1]
  std::vector<std::int64_t> kept;    // input voxels that passed the cutoff
};

// Voxels scoring above gamma spread into their k x k neighborhood (clipped to
// the grid). Each output voxel takes the per-channel max over the kept voxels
// whose neighborhood covers it, which equals a dense k x k max pool over a
// grid holding only the kept features.
Diffusion voxel_diffuse(const SparseBEV& feat, const Tensor& scores, double gamma, int kernel);

SparseBEV post_diffusion_refine(const SparseBEV& feat, const HeadConfig& cfg, const WindowConfig& window,
                                const HeadParams& params, const BlockContext& ctx = {});

struct HeadOutput {
  Tensor raw;      // [V, output_width]
  Tensor heatmap;  // sigmoid of column 0, [V, 1]
  Tensor box;      // dx, dy, dz, l, w, h, [V, 6]
  Tensor bin_logits;
  Tensor bin_residuals;
};

HeadOutput head_forward(const SparseBEV& feat, const HeadConfig& cfg, const HeadParams& params);

// Heading bins cover [-pi, pi) uniformly; the residual is the offset from the
// bin center divided by half the bin width.
struct HeadingCode {
  std::size_t bin = 0;
  double residual = 0;
};
HeadingCode encode_heading(double theta, int bins);
double decode_heading(std::size_t bin, double residual, int bins);
double bin_center(std::size_t bin, int bins);

}  // namespace swformer
