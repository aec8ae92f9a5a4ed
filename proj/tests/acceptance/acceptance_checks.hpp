#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "swformer/harness.hpp"

namespace swformer::acceptance {

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  bool skipped = false;
  std::string detail;
  double seconds = 0;
};

struct CheckOptions {
  bool include_training = true;
  std::ostream* log = nullptr;  // progress of the long checks
};

std::vector<int> criteria();
CheckResult run_criterion(int id, const CheckOptions& options = {});
std::string format_result(const CheckResult& result);

// The toy overfit setup: 8 scenes on a 64 x 64 grid, 32 channels, 3 scales.
struct ToySetup {
  ModelConfig model;
  std::uint64_t model_seed = 7;
  TrainConfig train;
  std::vector<SceneSpec> scenes;
};
ToySetup toy_setup();

}  // namespace swformer::acceptance
