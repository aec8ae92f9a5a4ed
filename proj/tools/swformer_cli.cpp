#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "acceptance_checks.hpp"
#include "swformer/config.hpp"
#include "swformer/error.hpp"
#include "swformer/harness.hpp"
#include "swformer/params.hpp"

namespace fs = std::filesystem;
using namespace swformer;

namespace {

struct ConfigArgs {
  std::string path;
  std::vector<std::string> sets;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", path, "key=value config file");
    cmd->add_option("--set", sets, "override one key (key=value), repeatable");
  }

  RunConfig load() const {
    RunConfig cfg = path.empty() ? RunConfig{} : load_config(path);
    for (const auto& s : sets) apply_assignment(cfg, s);
    cfg.validate();
    return cfg;
  }
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write " + path.string());
  return out;
}

std::vector<PointCloudScene> generate(const RunConfig& cfg) {
  std::vector<PointCloudScene> scenes;
  for (std::size_t i = 0; i < cfg.data.scenes; ++i) scenes.push_back(gen_scene(cfg.scene_spec(i)));
  return scenes;
}

std::vector<PointCloudScene> dataset(const RunConfig& cfg, const std::string& dir) {
  return dir.empty() ? generate(cfg) : load_dataset(dir, cfg.model.grid.extent);
}

void write_effective_config(const fs::path& path, const RunConfig& cfg) {
  auto out = open_out(path);
  write_config(out, cfg);
}

nlohmann::json report_json(const EvalReport& report) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : report.classes) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : c.curve) curve.push_back({{"recall", p.recall}, {"precision", p.precision}, {"score", p.score}});
    classes.push_back({{"class", class_name(c.cls)},
                       {"num_truth", c.num_truth},
                       {"num_detections", c.num_detections},
                       {"iou_thresholds", c.thresholds},
                       {"ap", c.ap},
                       {"recall", c.recall},
                       {"pr_curve", curve}});
  }
  return {{"classes", classes}};
}

int run_gen_data(const ConfigArgs& args, const std::string& out_dir) {
  const auto cfg = args.load();
  const auto scenes = generate(cfg);
  save_dataset(out_dir, scenes);
  write_effective_config(fs::path(out_dir) / "config.txt", cfg);
  std::cout << "wrote " << scenes.size() << " scenes to " << out_dir << '\n';
  return 0;
}

int run_train(const ConfigArgs& args, const std::string& data_dir, const std::string& out_dir) {
  const auto cfg = args.load();
  const auto scenes = dataset(cfg, data_dir);
  Model model(cfg.effective_model(), cfg.model_seed);
  fs::create_directories(out_dir);
  write_effective_config(fs::path(out_dir) / "config.txt", cfg);
  auto csv = open_out(fs::path(out_dir) / "loss.csv");
  const auto result = train_toy(model, scenes, cfg.train, &csv, fs::path(out_dir) / "nonfinite_dump.txt");
  save_checkpoint(model.params(), fs::path(out_dir) / "checkpoint.bin");
  std::cout << "steps " << result.curve.size();
  if (!result.curve.empty()) {
    std::cout << " initial_loss " << format_number(result.curve.front().total) << " final_loss "
              << format_number(result.curve.back().total);
  }
  std::cout << '\n';
  return 0;
}

Model load_model(const RunConfig& cfg, const std::string& checkpoint) {
  Model model(cfg.effective_model(), cfg.model_seed);
  if (!checkpoint.empty()) load_checkpoint(model.params(), checkpoint);
  return model;
}

int run_eval(const ConfigArgs& args, const std::string& checkpoint, const std::string& data_dir,
             const std::string& json_path, const std::string& det_dir) {
  const auto cfg = args.load();
  const auto scenes = dataset(cfg, data_dir);
  const auto model = load_model(cfg, checkpoint);
  std::vector<std::vector<Detection>> dets;
  const auto report = evaluate_model(model, scenes, {0.5, 0.7}, &dets);
  write_report(std::cout, report);
  if (!json_path.empty()) open_out(json_path) << report_json(report).dump(2) << '\n';
  if (!det_dir.empty()) {
    for (std::size_t i = 0; i < dets.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "scene_%03zu.detections.csv", i);
      auto out = open_out(fs::path(det_dir) / name);
      write_detections(out, dets[i]);
    }
  }
  return 0;
}

int run_export(const ConfigArgs& args, const std::string& checkpoint, const std::string& data_dir,
               std::size_t scene_index, std::optional<std::size_t> layer, bool all_queries,
               const std::string& out_path, const std::string& vectors_path) {
  const auto cfg = args.load();
  const auto scenes = dataset(cfg, data_dir);
  require(scene_index < scenes.size(), "scene index " + std::to_string(scene_index) + " out of range");
  const auto model = load_model(cfg, checkpoint);
  const auto ex = export_attention(model, scenes[scene_index], AttentionSelector{layer, !all_queries});
  if (out_path.empty()) {
    write_attention_csv(std::cout, ex);
  } else {
    auto out = open_out(out_path);
    write_attention_csv(out, ex);
  }
  if (!vectors_path.empty()) {
    auto out = open_out(vectors_path);
    write_query_key_csv(out, ex);
  }
  return 0;
}

int run_bench(const std::vector<int>& sizes, const std::vector<double>& occupancy, std::uint64_t seed, int repeats,
              int window_h, int window_w, const std::string& out_path) {
  WindowConfig window;
  window.height = window_h;
  window.width = window_w;
  window.validate();
  require(repeats > 0, "repeats must be positive");
  const auto rows = bench_partition(sizes, occupancy, window, seed, repeats);
  if (out_path.empty()) {
    write_bench_csv(std::cout, rows);
  } else {
    auto out = open_out(out_path);
    write_bench_csv(out, rows);
  }
  return 0;
}

int run_selftest(const std::vector<int>& ids, bool skip_training) {
  acceptance::CheckOptions opts;
  opts.include_training = !skip_training;
  bool ok = true;
  for (int id : ids.empty() ? acceptance::criteria() : ids) {
    const auto r = acceptance::run_criterion(id, opts);
    std::cout << acceptance::format_result(r) << std::endl;
    ok = ok && r.pass;
  }
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse window transformer 3D detector toolkit"};
  app.require_subcommand(1);

  ConfigArgs gen_cfg, train_cfg, eval_cfg, export_cfg;

  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen_cfg.add_to(gen);
  gen->add_option("--out", gen_out, "output directory")->required();

  std::string train_data, train_out;
  auto* train = app.add_subcommand("train", "train on a dataset and write checkpoint, loss curve and config");
  train_cfg.add_to(train);
  train->add_option("--data", train_data, "dataset directory (generated from the config when omitted)");
  train->add_option("--out", train_out, "run directory")->required();

  std::string eval_ckpt, eval_data, eval_json, eval_dets;
  auto* eval = app.add_subcommand("eval", "decode and score a dataset");
  eval_cfg.add_to(eval);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file");
  eval->add_option("--data", eval_data, "dataset directory (generated from the config when omitted)");
  eval->add_option("--json", eval_json, "write the report as JSON");
  eval->add_option("--detections", eval_dets, "write per-scene detection CSVs to this directory");

  std::vector<int> bench_sizes{64, 128, 256, 512};
  std::vector<double> bench_occ{0.01, 0.05, 0.1};
  std::uint64_t bench_seed = 1;
  int bench_repeats = 3, bench_h = 10, bench_w = 10;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench-partition", "time window, shifted and strided partitions");
  bench->add_option("--sizes", bench_sizes, "square grid sizes")->delimiter(',');
  bench->add_option("--occupancy", bench_occ, "occupancy rates in [0, 1]")->delimiter(',');
  bench->add_option("--seed", bench_seed);
  bench->add_option("--repeats", bench_repeats);
  bench->add_option("--window-height", bench_h);
  bench->add_option("--window-width", bench_w);
  bench->add_option("--out", bench_out, "CSV path (stdout when omitted)");

  std::string export_ckpt, export_data, export_out, export_vectors;
  std::size_t export_scene = 0;
  std::optional<std::size_t> export_layer;
  bool export_all = false;
  auto* exp = app.add_subcommand("export-attention", "write attention scores of query voxels as CSV");
  export_cfg.add_to(exp);
  exp->add_option("--checkpoint", export_ckpt, "checkpoint file");
  exp->add_option("--data", export_data, "dataset directory (generated from the config when omitted)");
  exp->add_option("--scene", export_scene, "scene index");
  exp->add_option("--layer", export_layer, "block layer index (all layers when omitted)");
  exp->add_flag("--all-queries", export_all, "export every query voxel, not only foreground ones");
  exp->add_option("--out", export_out, "score CSV path (stdout when omitted)");
  exp->add_option("--vectors", export_vectors, "write exported query/key vectors as CSV");

  std::vector<int> self_ids;
  bool self_skip_training = false;
  auto* self = app.add_subcommand("selftest", "run the oracle checks and print PASS/FAIL per criterion");
  self->add_option("--criterion", self_ids, "criterion ids to run (all when omitted)")->delimiter(',');
  self->add_flag("--skip-training", self_skip_training, "skip the toy overfit run");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return run_gen_data(gen_cfg, gen_out);
    if (*train) return run_train(train_cfg, train_data, train_out);
    if (*eval) return run_eval(eval_cfg, eval_ckpt, eval_data, eval_json, eval_dets);
    if (*bench) return run_bench(bench_sizes, bench_occ, bench_seed, bench_repeats, bench_h, bench_w, bench_out);
    if (*exp) {
      return run_export(export_cfg, export_ckpt, export_data, export_scene, export_layer, export_all, export_out,
                        export_vectors);
    }
    if (*self) return run_selftest(self_ids, self_skip_training);
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
