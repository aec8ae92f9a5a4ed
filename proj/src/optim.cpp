#include "swformer/optim.hpp"

#include <cmath>
#include <numbers>

#include "swformer/error.hpp"

namespace swformer {

double LrSchedule::at(std::size_t step) const {
  if (step < warmup_steps) {
    return warmup_lr + (base_lr - warmup_lr) * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (total_steps <= warmup_steps) return base_lr;
  const double progress =
      std::min(1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps));
  return final_lr + (base_lr - final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamState make_adam_state(const ParamStore& params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const auto& e : params.entries()) {
    state.first_moment.emplace_back(e.tensor.numel(), 0.0);
    state.second_moment.emplace_back(e.tensor.numel(), 0.0);
  }
  return state;
}

double adam_step(AdamState& state, ParamStore& params) {
  if (state.first_moment.size() != params.size()) throw ContractError("adam_step: state/parameter count mismatch");
  const auto& cfg = state.config;
  const double lr = cfg.schedule.at(state.step);
  const double t = static_cast<double>(state.step + 1);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor tensor = params.entries()[p].tensor;
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    if (m.size() != tensor.numel()) throw ContractError("adam_step: moment shape mismatch");
    auto grad = tensor.grad();
    auto values = tensor.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      values[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
    }
  }
  ++state.step;
  return lr;
}

}  // namespace swformer
