#include "swformer/metrics.hpp"

#include <algorithm>

#include "swformer/error.hpp"

namespace swformer {

std::vector<ScoredMatch> match_detections(const std::vector<std::vector<Detection>>& dets,
                                          const std::vector<std::vector<Box3D>>& truth, ObjectClass cls,
                                          double iou_threshold) {
  if (dets.size() != truth.size()) throw ContractError("match_detections: scene counts differ");
  std::vector<ScoredMatch> out;
  for (std::size_t s = 0; s < dets.size(); ++s) {
    std::vector<const Detection*> mine;
    for (const auto& d : dets[s])
      if (d.cls == cls) mine.push_back(&d);
    std::stable_sort(mine.begin(), mine.end(), [](const Detection* a, const Detection* b) { return a->score > b->score; });
    std::vector<bool> taken(truth[s].size(), false);
    for (const Detection* d : mine) {
      double best = iou_threshold;
      std::ptrdiff_t pick = -1;
      for (std::size_t g = 0; g < truth[s].size(); ++g) {
        if (taken[g]) continue;
        const double iou = bev_iou(d->box, truth[s][g]);
        if (iou >= best) {
          best = iou;
          pick = static_cast<std::ptrdiff_t>(g);
        }
      }
      if (pick >= 0) taken[static_cast<std::size_t>(pick)] = true;
      out.push_back({d->score, pick >= 0});
    }
  }
  return out;
}

std::vector<PrPoint> pr_curve(std::vector<ScoredMatch> matches, std::size_t num_truth) {
  std::stable_sort(matches.begin(), matches.end(), [](const ScoredMatch& a, const ScoredMatch& b) { return a.score > b.score; });
  std::vector<PrPoint> curve;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    tp += matches[i].true_positive;
    curve.push_back({num_truth ? double(tp) / double(num_truth) : 0.0, double(tp) / double(i + 1), matches[i].score});
  }
  return curve;
}

double average_precision(const std::vector<ScoredMatch>& matches, std::size_t num_truth) {
  if (num_truth == 0) return 0.0;
  const auto curve = pr_curve(matches, num_truth);
  double total = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double level = k / 100.0;
    double best = 0.0;
    for (const auto& p : curve)
      if (p.recall >= level - 1e-12) best = std::max(best, p.precision);
    total += best;
  }
  return total / 101.0;
}

EvalReport evaluate(const std::vector<std::vector<Detection>>& dets, const std::vector<std::vector<LabeledBox>>& truth,
                    const std::vector<double>& thresholds) {
  require(dets.size() == truth.size(), "evaluate: scene counts differ");
  require(!thresholds.empty(), "evaluate: need at least one IoU threshold");
  EvalReport report;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto cls = static_cast<ObjectClass>(c);
    std::vector<std::vector<Box3D>> boxes(truth.size());
    ClassReport r;
    r.cls = cls;
    for (std::size_t s = 0; s < truth.size(); ++s) {
      for (const auto& lb : truth[s])
        if (lb.cls == cls) boxes[s].push_back(lb.box);
      r.num_truth += boxes[s].size();
      for (const auto& d : dets[s]) r.num_detections += d.cls == cls;
    }
    if (r.num_truth == 0) continue;
    r.thresholds = thresholds;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      const auto matches = match_detections(dets, boxes, cls, thresholds[t]);
      std::size_t tp = 0;
      for (const auto& m : matches) tp += m.true_positive;
      r.ap.push_back(average_precision(matches, r.num_truth));
      r.recall.push_back(double(tp) / double(r.num_truth));
      if (t == 0) r.curve = pr_curve(matches, r.num_truth);
    }
    report.classes.push_back(std::move(r));
  }
  return report;
}

}  // namespace swformer
