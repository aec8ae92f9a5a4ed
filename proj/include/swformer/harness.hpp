#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "swformer/metrics.hpp"
#include "swformer/model.hpp"
#include "swformer/optim.hpp"
#include "swformer/scene.hpp"

namespace swformer {

struct TrainConfig {
  std::size_t steps = 2000;
  std::uint64_t seed = 1;
  double base_lr = 1e-3;
  double warmup_lr = 5e-4;
  std::size_t warmup_steps = 50;
  double final_lr = 0.0;
  bool augment = false;
  AugmentConfig augmentation;
  bool stochastic_depth = true;
};

struct LossRow {
  std::size_t step = 0;
  double lr = 0;
  double total = 0;
  std::vector<double> seg, heatmap, box;  // per class head
};

struct TrainResult {
  std::vector<LossRow> curve;
};

// Cycles through the scenes, one scene per Adam step. Writes one CSV row per
// step to `curve_csv` when given. A non-finite loss writes a diagnostic file
// next to `dump_path` (when set) and throws NumericError.
TrainResult train_toy(Model& model, const std::vector<PointCloudScene>& scenes, const TrainConfig& cfg,
                      std::ostream* curve_csv = nullptr, const std::optional<std::filesystem::path>& dump_path = {});

void write_loss_header(std::ostream& os, const std::vector<ObjectClass>& classes);
void write_loss_row(std::ostream& os, const LossRow& row);

// Scores decoded detections against the boxes that carry enough points to be
// trained on. Only the model's classes are scored. The decoded detections are
// stored in `detections` when given.
EvalReport evaluate_model(const Model& model, const std::vector<PointCloudScene>& scenes,
                          const std::vector<double>& thresholds = {0.5, 0.7},
                          std::vector<std::vector<Detection>>* detections = nullptr);
std::vector<std::vector<LabeledBox>> scoring_truth(const std::vector<PointCloudScene>& scenes, std::size_t min_points);
void write_report(std::ostream& os, const EvalReport& report);

struct BenchRow {
  int grid = 0;
  double occupancy = 0;
  std::size_t voxels = 0;
  std::size_t windows = 0;
  std::size_t shifted_windows = 0;
  std::size_t strided_voxels = 0;
  double partition_ms = 0, shifted_ms = 0, strided_ms = 0;  // mean over repeats
};

std::vector<BenchRow> bench_partition(const std::vector<int>& sizes, const std::vector<double>& occupancy,
                                      const WindowConfig& window, std::uint64_t seed, int repeats = 3);
void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows);

struct AttentionSelector {
  std::optional<std::size_t> layer;  // block layer index; all when unset
  bool foreground_only = true;       // queries inside a groundtruth box
};

struct AttentionRow {
  std::string stage;
  std::size_t scale = 0, layer = 0, head = 0;
  Coord query, key;
  double score = 0;
};

struct QueryKeyRow {
  std::string stage;
  std::size_t scale = 0, layer = 0;
  Coord voxel;
  std::vector<double> query, key;
};

struct AttentionExport {
  std::vector<AttentionRow> scores;
  std::vector<QueryKeyRow> vectors;  // projected queries and keys of exported query voxels and their keys
  std::size_t heads = 0;
};

// Eval-mode forward recording every attention map. Throws ContractError when
// the requested layer does not exist.
AttentionExport export_attention(const Model& model, const PointCloudScene& scene, const AttentionSelector& selector);
void write_attention_csv(std::ostream& os, const AttentionExport& ex);
void write_query_key_csv(std::ostream& os, const AttentionExport& ex);

}  // namespace swformer
