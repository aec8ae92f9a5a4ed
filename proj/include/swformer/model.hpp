#pragma once

#include <vector>

#include "swformer/decode.hpp"
#include "swformer/losses.hpp"
#include "swformer/targets.hpp"
#include "swformer/voxel.hpp"

namespace swformer {

struct ModelConfig {
  VoxelGrid grid;
  BackboneConfig backbone;
  HeadConfig head;
  LossConfig loss;
  EmbedOptions embed;
  PositionalMode positional = PositionalMode::kWindowLocal;
  std::vector<ObjectClass> classes{ObjectClass::kVehicle, ObjectClass::kPedestrian};

  void validate() const;
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;  // stochastic depth, training only
  AttentionRecorder* recorder = nullptr;
};

struct ClassForward {
  ObjectClass cls = ObjectClass::kVehicle;
  SparseBEV input;  // fused map read by this head
  Tensor seg;       // foreground scores on `input`
  Diffusion diffusion;
  SparseBEV refined;
  HeadOutput out;
};

struct ForwardResult {
  VoxelAssignment assignment;
  SparseBEV bev;
  std::vector<SparseBEV> pyramid;
  std::vector<SparseBEV> fused;
  std::vector<ClassForward> heads;
};

struct LossBreakdown {
  std::vector<ObjectClass> classes;
  std::vector<ClassLoss> parts;
  Tensor total = Tensor::scalar(0.0);
};

// Voxelization, embedding, backbone, fusion and one head per class.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  ForwardResult forward(const PointCloudScene& scene, const ForwardOptions& options = {}) const;
  LossBreakdown loss(const PointCloudScene& scene, const ForwardResult& fwd) const;
  // Eval-mode forward without a tape, decoded per class.
  std::vector<Detection> detect(const PointCloudScene& scene) const;
  std::vector<Detection> decode_all(const ForwardResult& fwd) const;

 private:
  std::size_t head_index(ObjectClass cls) const;

  ModelConfig config_;
  ParamStore store_;
  EmbedParams embed_;
  BackboneParams backbone_;
  FusionParams fusion_;
  std::vector<HeadParams> heads_;
};

}  // namespace swformer
