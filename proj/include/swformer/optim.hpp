#pragma once

#include <cstddef>
#include <vector>

#include "swformer/params.hpp"

namespace swformer {

// Linear warmup from `warmup_lr` to `base_lr`, then cosine decay to
// `final_lr` at `total_steps`.
struct LrSchedule {
  double base_lr = 1e-3;
  double warmup_lr = 5e-4;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 1;
  double final_lr = 0.0;

  double at(std::size_t step) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LrSchedule schedule;
};

struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

AdamState make_adam_state(const ParamStore& params, const AdamConfig& config);

// Applies one update to every parameter holding a gradient and advances the
// step counter. Returns the learning rate used.
double adam_step(AdamState& state, ParamStore& params);

}  // namespace swformer
