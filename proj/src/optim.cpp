#include "vsrpp/optim.hpp"

#include <cmath>
#include <iostream>
#include <numbers>

namespace vsrpp {

OptimizerState::OptimizerState(std::vector<ParamGroup> groups, AdamConfig config)
    : groups_(std::move(groups)), config_(config) {
  if (groups_.empty()) throw UsageError("optimizer needs at least one parameter group");
}

OptimizerState OptimizerState::two_group(double main_lr, double flow_lr, AdamConfig config) {
  return OptimizerState({{"main", "", main_lr, false}, {"flow", "flow.", flow_lr, false}}, config);
}

size_t OptimizerState::group_of(const std::string& param) const {
  size_t fallback = groups_.size();
  for (size_t i = 0; i < groups_.size(); ++i) {
    if (groups_[i].prefix.empty()) {
      if (fallback == groups_.size()) fallback = i;
    } else if (param.rfind(groups_[i].prefix, 0) == 0) {
      return i;
    }
  }
  if (fallback == groups_.size()) throw UsageError("parameter '" + param + "' belongs to no optimizer group");
  return fallback;
}

ParamGroup& OptimizerState::group(const std::string& name) {
  for (auto& g : groups_) {
    if (g.name == name) return g;
  }
  throw UsageError("unknown parameter group '" + name + "'");
}

void OptimizerState::adam_step(ModelWeights& weights, const GradientMap<float>& grads,
                               const std::vector<double>& lr_now) {
  if (lr_now.size() != groups_.size()) {
    throw UsageError("adam_step: expected " + std::to_string(groups_.size()) + " learning rates, got " +
                     std::to_string(lr_now.size()));
  }
  ++step_;
  const float b1 = static_cast<float>(config_.beta1), b2 = static_cast<float>(config_.beta2);
  const float eps = static_cast<float>(config_.eps);
  for (auto& entry : weights) {
    const size_t gi = group_of(entry.name);
    if (groups_[gi].frozen) continue;
    auto it = grads.find(entry.name);
    if (it == grads.end()) throw UsageError("adam_step: missing gradient for '" + entry.name + "'");
    const Tensorf& g = it->second;
    if (g.shape() != entry.value.shape()) {
      throw DimensionError("adam_step: gradient shape " + shape_string(g.shape()) + " for '" + entry.name +
                           "' expected " + shape_string(entry.value.shape()));
    }
    Moments& mo = moments_[entry.name];
    if (mo.m.empty()) {
      mo.m = Tensorf(entry.value.shape());
      mo.v = Tensorf(entry.value.shape());
    }
    ++mo.steps;
    mo.m.array() = b1 * mo.m.array() + (1.0f - b1) * g.array();
    mo.v.array() = b2 * mo.v.array() + (1.0f - b2) * g.array().square();
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(mo.steps));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(mo.steps));
    const float step_size = static_cast<float>(lr_now[gi] / c1);
    const float denom_scale = static_cast<float>(1.0 / std::sqrt(c2));
    entry.value.array() -= step_size * mo.m.array() / (mo.v.array().sqrt() * denom_scale + eps);
  }
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_base) {
  if (total_steps <= 0) throw UsageError("cosine_lr: total_steps must be positive");
  if (step < 0) throw UsageError("cosine_lr: negative step");
  if (step > total_steps) {
    std::cerr << "warning: cosine_lr step " << step << " past schedule end " << total_steps << ", using 0\n";
    return 0.0;
  }
  if (step == total_steps) return 0.0;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_base * (1.0 + std::cos(std::numbers::pi * t)) / 2.0;
}

bool freeze_flow(OptimizerState& state, std::int64_t step, std::int64_t freeze_steps) {
  const bool frozen = step < freeze_steps;
  for (auto& g : state.groups()) {
    if (g.name == "flow") g.frozen = frozen;
  }
  return frozen;
}

}  // namespace vsrpp
