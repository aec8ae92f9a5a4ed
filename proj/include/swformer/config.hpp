#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "swformer/harness.hpp"

namespace swformer {

struct DataConfig {
  SceneSpec scene;  // scene i uses seed scene.seed + i
  std::size_t scenes = 8;
};

// Everything a CLI run needs. Every backbone scale shares `scale_block` and
// `window`; the grid extent also bounds generated scenes.
struct RunConfig {
  ModelConfig model;
  BlockConfig scale_block;
  WindowConfig window;
  std::uint64_t model_seed = 7;
  TrainConfig train;
  DataConfig data;

  ModelConfig effective_model() const;
  SceneSpec scene_spec(std::size_t index) const;
  void validate() const;
};

// Applies one key=value assignment. Unknown keys and malformed values throw
// ContractError.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
void apply_assignment(RunConfig& cfg, const std::string& assignment);

// Flat text: one key = value per line, '#' starts a comment.
RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::filesystem::path& path);

// Every key with its effective value, in a form parse_config accepts.
void write_config(std::ostream& os, const RunConfig& cfg);
std::vector<std::string> config_keys();

}  // namespace swformer
