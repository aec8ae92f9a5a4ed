#include "swformer/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <type_traits>

#include "swformer/error.hpp"

namespace swformer {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
void parse_number(const std::string& text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ContractError("not a number: '" + text + "'");
}

template <class T>
  requires(std::is_arithmetic_v<T> && !std::is_same_v<T, bool>)
void parse_value(const std::string& text, T& out) {
  parse_number(text, out);
}

void parse_value(const std::string& text, bool& out) {
  if (text == "true" || text == "1") {
    out = true;
  } else if (text == "false" || text == "0") {
    out = false;
  } else {
    throw ContractError("not a boolean: '" + text + "'");
  }
}

void parse_value(const std::string& text, std::vector<int>& out) {
  out.clear();
  for (const auto& item : split_list(text)) parse_number(item, out.emplace_back());
}

void parse_value(const std::string& text, std::vector<ObjectClass>& out) {
  out.clear();
  for (const auto& item : split_list(text)) out.push_back(parse_class(item));
}

void parse_value(const std::string& text, PositionalMode& out) {
  if (text == "window_local") {
    out = PositionalMode::kWindowLocal;
  } else if (text == "global") {
    out = PositionalMode::kGlobal;
  } else {
    throw ContractError("positional mode must be window_local or global, got '" + text + "'");
  }
}

std::string to_text(double v) { return format_number(v); }

template <class T>
  requires(std::is_integral_v<T> && !std::is_same_v<T, bool>)
std::string to_text(T v) {
  return std::to_string(v);
}
std::string to_text(bool v) { return v ? "true" : "false"; }
std::string to_text(PositionalMode v) { return v == PositionalMode::kGlobal ? "global" : "window_local"; }

std::string to_text(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string to_text(const std::vector<ObjectClass>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + class_name(v[i]);
  return out;
}

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Access>
Entry field(std::string key, Access access) {
  return Entry{std::move(key),
               [access](RunConfig& cfg, const std::string& text) { parse_value(text, access(cfg)); },
               [access](const RunConfig& cfg) { return to_text(access(const_cast<RunConfig&>(cfg))); }};
}

#define SWF_FIELD(key, expr) field(key, [](RunConfig& c) -> auto& { return c.expr; })

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back(SWF_FIELD("grid.x_min", model.grid.extent.x_min));
    t.push_back(SWF_FIELD("grid.y_min", model.grid.extent.y_min));
    t.push_back(SWF_FIELD("grid.x_max", model.grid.extent.x_max));
    t.push_back(SWF_FIELD("grid.y_max", model.grid.extent.y_max));
    t.push_back(SWF_FIELD("grid.voxel_size", model.grid.voxel_size));

    t.push_back(SWF_FIELD("model.seed", model_seed));
    t.push_back(SWF_FIELD("model.classes", model.classes));
    t.push_back(SWF_FIELD("model.positional", model.positional));
    t.push_back(SWF_FIELD("embed.absolute_coords", model.embed.absolute_coords));

    t.push_back(SWF_FIELD("backbone.strides", model.backbone.strides));
    t.push_back(SWF_FIELD("backbone.channels", model.backbone.channels));
    t.push_back(SWF_FIELD("backbone.heads", model.backbone.heads));
    t.push_back(SWF_FIELD("backbone.mlp_ratio", model.backbone.mlp_ratio));
    t.push_back(SWF_FIELD("backbone.fusion_survival", model.backbone.fusion_survival));
    t.push_back(SWF_FIELD("backbone.layers_before", scale_block.layers_before));
    t.push_back(SWF_FIELD("backbone.layers_after", scale_block.layers_after));
    t.push_back(SWF_FIELD("backbone.survival", scale_block.survival));
    t.push_back(SWF_FIELD("backbone.extra_shifts", scale_block.extra_shifts));

    t.push_back(SWF_FIELD("window.height", window.height));
    t.push_back(SWF_FIELD("window.width", window.width));
    t.push_back(SWF_FIELD("window.max_buckets", window.max_buckets));

    t.push_back(SWF_FIELD("head.gamma", model.head.gamma));
    t.push_back(SWF_FIELD("head.kernel_vehicle", model.head.kernel[0]));
    t.push_back(SWF_FIELD("head.kernel_pedestrian", model.head.kernel[1]));
    t.push_back(SWF_FIELD("head.delta1", model.head.delta1));
    t.push_back(SWF_FIELD("head.delta2", model.head.delta2));
    t.push_back(SWF_FIELD("head.target_cap_vehicle", model.head.target_cap[0]));
    t.push_back(SWF_FIELD("head.target_cap_pedestrian", model.head.target_cap[1]));
    t.push_back(SWF_FIELD("head.scale_vehicle", model.head.scale[0]));
    t.push_back(SWF_FIELD("head.scale_pedestrian", model.head.scale[1]));
    t.push_back(SWF_FIELD("head.heading_bins", model.head.heading_bins));
    t.push_back(SWF_FIELD("head.min_points", model.head.min_points));
    t.push_back(SWF_FIELD("head.min_overlap", model.head.min_overlap));
    t.push_back(SWF_FIELD("head.refine_layers_before", model.head.refine.layers_before));
    t.push_back(SWF_FIELD("head.refine_layers_after", model.head.refine.layers_after));
    t.push_back(SWF_FIELD("head.refine_survival", model.head.refine.survival));
    t.push_back(SWF_FIELD("head.refine_extra_shifts", model.head.refine.extra_shifts));

    t.push_back(SWF_FIELD("loss.focal_epsilon", model.loss.focal_epsilon));
    t.push_back(SWF_FIELD("loss.alpha", model.loss.alpha));
    t.push_back(SWF_FIELD("loss.beta", model.loss.beta));
    t.push_back(SWF_FIELD("loss.seg_focusing", model.loss.seg_focusing));
    t.push_back(SWF_FIELD("loss.prob_clamp", model.loss.prob_clamp));
    t.push_back(SWF_FIELD("loss.lambda_seg", model.loss.lambda_seg));
    t.push_back(SWF_FIELD("loss.lambda_hm", model.loss.lambda_hm));
    t.push_back(SWF_FIELD("loss.smooth_l1_beta", model.loss.smooth_l1_beta));
    t.push_back(SWF_FIELD("loss.iou_loss", model.loss.iou_loss));

    t.push_back(SWF_FIELD("train.steps", train.steps));
    t.push_back(SWF_FIELD("train.seed", train.seed));
    t.push_back(SWF_FIELD("train.base_lr", train.base_lr));
    t.push_back(SWF_FIELD("train.warmup_lr", train.warmup_lr));
    t.push_back(SWF_FIELD("train.warmup_steps", train.warmup_steps));
    t.push_back(SWF_FIELD("train.final_lr", train.final_lr));
    t.push_back(SWF_FIELD("train.augment", train.augment));
    t.push_back(SWF_FIELD("train.stochastic_depth", train.stochastic_depth));

    t.push_back(SWF_FIELD("augment.rotate_prob", train.augmentation.rotate_prob));
    t.push_back(SWF_FIELD("augment.flip_prob", train.augmentation.flip_prob));
    t.push_back(SWF_FIELD("augment.scale_prob", train.augmentation.scale_prob));
    t.push_back(SWF_FIELD("augment.scale_min", train.augmentation.scale_min));
    t.push_back(SWF_FIELD("augment.scale_max", train.augmentation.scale_max));
    t.push_back(SWF_FIELD("augment.drop_prob", train.augmentation.drop_prob));

    t.push_back(SWF_FIELD("data.scenes", data.scenes));
    t.push_back(SWF_FIELD("data.seed", data.scene.seed));
    t.push_back(SWF_FIELD("data.vehicles_min", data.scene.vehicles_min));
    t.push_back(SWF_FIELD("data.vehicles_max", data.scene.vehicles_max));
    t.push_back(SWF_FIELD("data.pedestrians_min", data.scene.pedestrians_min));
    t.push_back(SWF_FIELD("data.pedestrians_max", data.scene.pedestrians_max));
    t.push_back(SWF_FIELD("data.points_per_box_min", data.scene.points_per_box_min));
    t.push_back(SWF_FIELD("data.points_per_box_max", data.scene.points_per_box_max));
    t.push_back(SWF_FIELD("data.clutter_points", data.scene.clutter_points));
    t.push_back(SWF_FIELD("data.frames", data.scene.frames));
    t.push_back(SWF_FIELD("data.frame_interval", data.scene.frame_interval));
    t.push_back(SWF_FIELD("data.margin", data.scene.margin));
    t.push_back(SWF_FIELD("data.max_retries", data.scene.max_retries));
    return t;
  }();
  return table;
}

#undef SWF_FIELD

}  // namespace

ModelConfig RunConfig::effective_model() const {
  ModelConfig out = model;
  out.backbone.blocks.assign(out.backbone.strides.size(), scale_block);
  out.backbone.windows.assign(out.backbone.strides.size(), window);
  return out;
}

SceneSpec RunConfig::scene_spec(std::size_t index) const {
  SceneSpec spec = data.scene;
  spec.extent = model.grid.extent;
  spec.seed = data.scene.seed + index;
  return spec;
}

void RunConfig::validate() const {
  effective_model().validate();
  scene_spec(0).validate();
  train.augmentation.validate();
  require(train.base_lr >= 0 && train.warmup_lr >= 0 && train.final_lr >= 0, "learning rates must be non-negative");
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (e.key != key) continue;
    try {
      e.set(cfg, value);
    } catch (const ContractError& err) {
      throw ContractError("config key '" + key + "': " + err.what());
    }
    return;
  }
  throw ContractError("unknown config key '" + key + "'");
}

void apply_assignment(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ContractError("expected key=value, got '" + assignment + "'");
  apply_setting(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig parse_config(std::istream& is) {
  RunConfig cfg;
  std::string line;
  std::size_t number = 0;
  while (std::getline(is, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_assignment(cfg, line);
    } catch (const ContractError& err) {
      throw ContractError("line " + std::to_string(number) + ": " + err.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open config " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& os, const RunConfig& cfg) {
  for (const auto& e : entries()) os << e.key << " = " << e.get(cfg) << '\n';
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : entries()) keys.push_back(e.key);
  return keys;
}

}  // namespace swformer
