#include "swformer/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "swformer/error.hpp"

namespace swformer {

void write_loss_header(std::ostream& os, const std::vector<ObjectClass>& classes) {
  os << "step,lr,total";
  for (auto c : classes) os << ",seg_" << class_name(c) << ",heatmap_" << class_name(c) << ",box_" << class_name(c);
  os << '\n';
}

void write_loss_row(std::ostream& os, const LossRow& row) {
  os << row.step << ',' << format_number(row.lr) << ',' << format_number(row.total);
  for (std::size_t c = 0; c < row.seg.size(); ++c) {
    os << ',' << format_number(row.seg[c]) << ',' << format_number(row.heatmap[c]) << ',' << format_number(row.box[c]);
  }
  os << '\n';
}

namespace {

void dump_failure(const std::filesystem::path& path, const Model& model, const LossRow& row) {
  std::ofstream os(path);
  if (!os) return;
  os << "non-finite loss at step " << row.step << "\n";
  write_loss_header(os, model.config().classes);
  write_loss_row(os, row);
  os << "parameter,max_abs,grad_max_abs\n";
  for (const auto& e : model.params().entries()) {
    double v = 0.0, g = 0.0;
    for (double x : e.tensor.values()) v = std::max(v, std::abs(x));
    for (double x : e.tensor.grad()) g = std::max(g, std::abs(x));
    os << e.name << ',' << format_number(v) << ',' << format_number(g) << '\n';
  }
}

}  // namespace

TrainResult train_toy(Model& model, const std::vector<PointCloudScene>& scenes, const TrainConfig& cfg,
                      std::ostream* curve_csv, const std::optional<std::filesystem::path>& dump_path) {
  require(!scenes.empty(), "train_toy needs at least one scene");
  AdamConfig adam;
  adam.schedule = {cfg.base_lr, cfg.warmup_lr, cfg.warmup_steps, std::max<std::size_t>(cfg.steps, 1), cfg.final_lr};
  AdamState state = make_adam_state(model.params(), adam);
  Rng rng(cfg.seed);
  TrainResult result;
  if (curve_csv) write_loss_header(*curve_csv, model.config().classes);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const PointCloudScene& base = scenes[step % scenes.size()];
    const PointCloudScene scene = cfg.augment ? augment(base, cfg.augmentation, rng) : base;
    ForwardOptions opts;
    opts.training = cfg.stochastic_depth;
    opts.rng = &rng;
    const ForwardResult fwd = model.forward(scene, opts);
    const LossBreakdown loss = model.loss(scene, fwd);
    LossRow row;
    row.step = step;
    row.lr = adam.schedule.at(step);
    row.total = loss.total.item();
    for (const auto& p : loss.parts) {
      row.seg.push_back(p.seg.item());
      row.heatmap.push_back(p.heatmap.item());
      row.box.push_back(p.box.item());
    }
    if (!std::isfinite(row.total)) {
      if (dump_path) dump_failure(*dump_path, model, row);
      throw NumericError("non-finite loss at step " + std::to_string(step));
    }
    model.params().zero_grad();
    backward(loss.total);
    adam_step(state, model.params());
    if (curve_csv) write_loss_row(*curve_csv, row);
    result.curve.push_back(std::move(row));
  }
  return result;
}

std::vector<std::vector<LabeledBox>> scoring_truth(const std::vector<PointCloudScene>& scenes, std::size_t min_points) {
  std::vector<std::vector<LabeledBox>> truth;
  for (const auto& s : scenes) {
    std::vector<LabeledBox> boxes;
    for (int c = 0; c < kNumClasses; ++c) {
      const auto cls = static_cast<ObjectClass>(c);
      for (const auto& b : training_boxes(s, cls, min_points)) boxes.push_back({b, cls});
    }
    truth.push_back(std::move(boxes));
  }
  return truth;
}

EvalReport evaluate_model(const Model& model, const std::vector<PointCloudScene>& scenes,
                          const std::vector<double>& thresholds, std::vector<std::vector<Detection>>* detections) {
  std::vector<std::vector<Detection>> dets;
  for (const auto& s : scenes) dets.push_back(model.detect(s));
  auto truth = scoring_truth(scenes, model.config().head.min_points);
  // Only classes the model predicts are scored.
  for (auto& boxes : truth) {
    std::erase_if(boxes, [&](const LabeledBox& lb) {
      const auto& cl = model.config().classes;
      return std::find(cl.begin(), cl.end(), lb.cls) == cl.end();
    });
  }
  auto report = evaluate(dets, truth, thresholds);
  if (detections != nullptr) *detections = std::move(dets);
  return report;
}

void write_report(std::ostream& os, const EvalReport& report) {
  os << "class,num_truth,num_detections,iou_threshold,ap,recall\n";
  for (const auto& c : report.classes) {
    for (std::size_t t = 0; t < c.thresholds.size(); ++t) {
      os << class_name(c.cls) << ',' << c.num_truth << ',' << c.num_detections << ',' << format_number(c.thresholds[t])
         << ',' << format_number(c.ap[t]) << ',' << format_number(c.recall[t]) << '\n';
    }
  }
}

std::vector<BenchRow> bench_partition(const std::vector<int>& sizes, const std::vector<double>& occupancy,
                                      const WindowConfig& window, std::uint64_t seed, int repeats) {
  require(repeats >= 1, "bench_partition needs at least one repeat");
  window.validate();
  using clock = std::chrono::steady_clock;
  auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
  Rng rng(seed);
  std::vector<BenchRow> rows;
  for (int size : sizes) {
    require(size >= 1, "grid sizes must be positive");
    for (double rate : occupancy) {
      require(rate >= 0.0 && rate <= 1.0, "occupancy must lie in [0, 1]");
      SparseBEV bev;
      bev.grid = {size, size};
      for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
          if (rng.bernoulli(rate)) bev.coords.push_back({r, c});
      bev.features = Tensor::zeros({bev.coords.size(), 1});
      BenchRow row;
      row.grid = size;
      row.occupancy = rate;
      row.voxels = bev.size();
      for (int rep = 0; rep < repeats; ++rep) {
        auto t0 = clock::now();
        const auto plain = window_partition(bev, window);
        auto t1 = clock::now();
        const auto shifted = shifted_partition(bev, window, ShiftSpec::half(window));
        auto t2 = clock::now();
        const auto strided = strided_select(bev.coords, 2);
        auto t3 = clock::now();
        row.windows = plain.num_windows();
        row.shifted_windows = shifted.num_windows();
        row.strided_voxels = strided.coords.size();
        row.partition_ms += ms(t1 - t0) / repeats;
        row.shifted_ms += ms(t2 - t1) / repeats;
        row.strided_ms += ms(t3 - t2) / repeats;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "grid,occupancy,voxels,windows,shifted_windows,strided_voxels,partition_ms,shifted_ms,strided_ms\n";
  for (const auto& r : rows) {
    os << r.grid << ',' << format_number(r.occupancy) << ',' << r.voxels << ',' << r.windows << ','
       << r.shifted_windows << ',' << r.strided_voxels << ',' << format_number(r.partition_ms) << ','
       << format_number(r.shifted_ms) << ',' << format_number(r.strided_ms) << '\n';
  }
}

AttentionExport export_attention(const Model& model, const PointCloudScene& scene, const AttentionSelector& selector) {
  AttentionRecorder recorder;
  {
    NoGradGuard guard;
    ForwardOptions opts;
    opts.recorder = &recorder;
    model.forward(scene, opts);
  }
  if (selector.layer) {
    const bool known = std::any_of(recorder.records.begin(), recorder.records.end(),
                                   [&](const AttentionRecord& r) { return r.layer == *selector.layer; });
    if (!known) throw ContractError("unknown attention layer " + std::to_string(*selector.layer));
  }
  const VoxelGrid& grid = model.config().grid;
  auto foreground = [&](Coord c, int stride) {
    const double x = grid.center_x(c.col, stride), y = grid.center_y(c.row, stride);
    return std::any_of(scene.boxes.begin(), scene.boxes.end(),
                       [&](const LabeledBox& lb) { return contains_bev(lb.box, x, y); });
  };
  AttentionExport ex;
  for (const auto& rec : recorder.records) {
    if (selector.layer && rec.layer != *selector.layer) continue;
    const auto& cap = rec.capture;
    ex.heads = cap.heads;
    const std::size_t len = cap.length, ch = cap.heads * cap.head_dim;
    for (std::size_t w = 0; w < cap.batch; ++w) {
      std::set<std::size_t> involved;
      for (std::size_t q = 0; q < len; ++q) {
        const Coord qc = rec.slot_voxel[w * len + q];
        if (qc.row < 0 || (selector.foreground_only && !foreground(qc, rec.stride))) continue;
        involved.insert(q);
        for (std::size_t h = 0; h < cap.heads; ++h) {
          for (std::size_t k = 0; k < len; ++k) {
            const Coord kc = rec.slot_voxel[w * len + k];
            if (kc.row < 0) continue;
            involved.insert(k);
            const double p = cap.probs[((w * cap.heads + h) * len + q) * len + k];
            ex.scores.push_back({rec.stage, rec.scale, rec.layer, h, qc, kc, p});
          }
        }
      }
      for (auto s : involved) {
        const auto base = cap.query.begin() + static_cast<std::ptrdiff_t>((w * len + s) * ch);
        const auto kbase = cap.key.begin() + static_cast<std::ptrdiff_t>((w * len + s) * ch);
        ex.vectors.push_back({rec.stage, rec.scale, rec.layer, rec.slot_voxel[w * len + s],
                              std::vector<double>(base, base + static_cast<std::ptrdiff_t>(ch)),
                              std::vector<double>(kbase, kbase + static_cast<std::ptrdiff_t>(ch))});
      }
    }
  }
  return ex;
}

void write_attention_csv(std::ostream& os, const AttentionExport& ex) {
  os << "stage,scale,layer,head,query_row,query_col,key_row,key_col,score\n";
  for (const auto& r : ex.scores) {
    os << r.stage << ',' << r.scale << ',' << r.layer << ',' << r.head << ',' << r.query.row << ',' << r.query.col
       << ',' << r.key.row << ',' << r.key.col << ',' << format_number(r.score) << '\n';
  }
}

void write_query_key_csv(std::ostream& os, const AttentionExport& ex) {
  os << "stage,scale,layer,voxel_row,voxel_col,kind,values\n";
  for (const auto& r : ex.vectors) {
    for (int kind = 0; kind < 2; ++kind) {
      os << r.stage << ',' << r.scale << ',' << r.layer << ',' << r.voxel.row << ',' << r.voxel.col << ','
         << (kind == 0 ? "query" : "key");
      for (double v : kind == 0 ? r.query : r.key) os << ',' << format_number(v);
      os << '\n';
    }
  }
}

}  // namespace swformer
