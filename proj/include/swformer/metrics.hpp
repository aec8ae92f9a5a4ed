#pragma once

#include <vector>

#include "swformer/decode.hpp"

namespace swformer {

struct ScoredMatch {
  double score = 0;
  bool true_positive = false;
};

struct PrPoint {
  double recall = 0;
  double precision = 0;
  double score = 0;
};

// Greedy matching per scene: detections of `cls` in descending score each
// claim the unmatched groundtruth box of highest rotated BEV IoU, if that IoU
// reaches the threshold.
std::vector<ScoredMatch> match_detections(const std::vector<std::vector<Detection>>& dets,
                                          const std::vector<std::vector<Box3D>>& truth, ObjectClass cls,
                                          double iou_threshold);

std::vector<PrPoint> pr_curve(std::vector<ScoredMatch> matches, std::size_t num_truth);

// Mean over recall levels 0, 0.01, ..., 1 of the best precision reached at
// that recall or beyond.
double average_precision(const std::vector<ScoredMatch>& matches, std::size_t num_truth);

struct ClassReport {
  ObjectClass cls = ObjectClass::kVehicle;
  std::size_t num_truth = 0;
  std::size_t num_detections = 0;
  std::vector<double> thresholds;  // BEV IoU
  std::vector<double> ap;          // per threshold
  std::vector<double> recall;      // per threshold, over all detections
  std::vector<PrPoint> curve;      // at the first threshold
};

struct EvalReport {
  std::vector<ClassReport> classes;  // only classes with groundtruth
};

// `truth[s]` holds the boxes of scene s used for scoring.
EvalReport evaluate(const std::vector<std::vector<Detection>>& dets, const std::vector<std::vector<LabeledBox>>& truth,
                    const std::vector<double>& thresholds = {0.5, 0.7});

}  // namespace swformer
