#include "swformer/model.hpp"

#include "swformer/error.hpp"

namespace swformer {

void ModelConfig::validate() const {
  require(grid.voxel_size > 0 && grid.extent.x_max > grid.extent.x_min && grid.extent.y_max > grid.extent.y_min,
          "voxel grid needs a positive size and extent");
  backbone.validate();
  head.validate();
  loss.validate();
  require(!classes.empty(), "at least one class head is required");
  for (auto cls : classes) {
    require(head.scale[static_cast<int>(cls)] < backbone.num_scales(), "class head reads a missing pyramid level");
  }
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  embed_ = make_embed_params(store_, "embed", config_.backbone.channels, rng);
  backbone_ = make_backbone_params(store_, config_.backbone, rng);
  fusion_ = make_fusion_params(store_, config_.backbone, rng);
  for (auto cls : config_.classes) {
    heads_.push_back(make_head_params(store_, "head." + class_name(cls), cls, config_.head, config_.backbone, rng));
  }
}

std::size_t Model::head_index(ObjectClass cls) const {
  for (std::size_t i = 0; i < config_.classes.size(); ++i)
    if (config_.classes[i] == cls) return i;
  throw ContractError("model has no head for class " + class_name(cls));
}

ForwardResult Model::forward(const PointCloudScene& scene, const ForwardOptions& options) const {
  ForwardResult r;
  const auto points = scene.all_points();
  r.assignment = dynamic_voxelize(points, config_.grid);
  r.bev = embed_and_pool(r.assignment, points, embed_, config_.embed);
  BlockContext ctx;
  ctx.training = options.training;
  ctx.rng = options.rng;
  ctx.positional = config_.positional;
  ctx.recorder = options.recorder;
  r.pyramid = backbone_forward(r.bev, config_.backbone, backbone_, ctx);
  r.fused = fuse_features(r.pyramid, config_.backbone, fusion_, ctx);
  for (std::size_t h = 0; h < config_.classes.size(); ++h) {
    const ObjectClass cls = config_.classes[h];
    const std::size_t level = config_.head.scale[static_cast<int>(cls)];
    ClassForward c;
    c.cls = cls;
    c.input = r.fused[level];
    c.seg = foreground_segment(c.input, heads_[h]);
    c.diffusion = voxel_diffuse(c.input, c.seg, config_.head.gamma, config_.head.kernel[static_cast<int>(cls)]);
    BlockContext head_ctx = ctx;
    head_ctx.stage = "head." + class_name(cls);
    head_ctx.scale = level;
    c.refined = post_diffusion_refine(c.diffusion.bev, config_.head, config_.backbone.window(level), heads_[h],
                                      head_ctx);
    c.out = head_forward(c.refined, config_.head, heads_[h]);
    r.heads.push_back(std::move(c));
  }
  return r;
}

LossBreakdown Model::loss(const PointCloudScene& scene, const ForwardResult& fwd) const {
  LossBreakdown b;
  for (const auto& c : fwd.heads) {
    const auto boxes = training_boxes(scene, c.cls, config_.head.min_points);
    const ClassTargets seg_targets = assign_targets(boxes, c.input, config_.grid, c.cls, config_.head);
    const ClassTargets targets = assign_targets(boxes, c.refined, config_.grid, c.cls, config_.head);
    ClassLoss part;
    part.seg = seg_focal_loss(c.seg, seg_targets.foreground, config_.loss);
    part.heatmap = heatmap_focal_loss(c.out.heatmap, targets.heatmap, targets.num_boxes, config_.loss);
    part.box = box_regression_loss(c.out, targets, config_.head, config_.loss);
    b.classes.push_back(c.cls);
    b.parts.push_back(part);
  }
  b.total = total_loss(b.parts, config_.loss);
  return b;
}

std::vector<Detection> Model::decode_all(const ForwardResult& fwd) const {
  std::vector<Detection> all;
  for (const auto& c : fwd.heads) {
    auto dets = decode(c.refined, c.out, config_.grid, c.cls, config_.head);
    all.insert(all.end(), dets.begin(), dets.end());
  }
  return all;
}

std::vector<Detection> Model::detect(const PointCloudScene& scene) const {
  NoGradGuard guard;
  return decode_all(forward(scene));
}

}  // namespace swformer
