#pragma once

#include "vsrpp/params.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vsrpp {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Parameters whose name starts with `prefix` share a learning rate. An
/// empty prefix matches everything not claimed by another group.
struct ParamGroup {
  std::string name;
  std::string prefix;
  double base_lr = 1e-4;
  bool frozen = false;
};

class OptimizerState {
 public:
  OptimizerState(std::vector<ParamGroup> groups, AdamConfig config = {});

  /// Main network at 1e-4, flow refiner ("flow." prefix) at 2.5e-5.
  static OptimizerState two_group(double main_lr = 1e-4, double flow_lr = 2.5e-5, AdamConfig config = {});

  const AdamConfig& config() const { return config_; }
  std::vector<ParamGroup>& groups() { return groups_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }
  size_t group_of(const std::string& param) const;
  ParamGroup& group(const std::string& name);

  std::int64_t step() const { return step_; }

  /// One bias-corrected Adam update. `lr_now` holds one rate per group;
  /// frozen groups are skipped and need no gradients.
  void adam_step(ModelWeights& weights, const GradientMap<float>& grads, const std::vector<double>& lr_now);

  /// True if `param` is currently updated (its group is not frozen).
  bool trainable(const std::string& param) const { return !groups_[group_of(param)].frozen; }

 private:
  struct Moments {
    Tensorf m, v;
    std::int64_t steps = 0;
  };

  std::vector<ParamGroup> groups_;
  AdamConfig config_;
  std::unordered_map<std::string, Moments> moments_;
  std::int64_t step_ = 0;
};

/// lr_base * (1 + cos(pi * step / total)) / 2. Steps past the end clamp to
/// zero with a warning on stderr.
double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_base);

/// Freezes the "flow" group while step < freeze_steps. Returns the flag.
bool freeze_flow(OptimizerState& state, std::int64_t step, std::int64_t freeze_steps);

}  // namespace vsrpp
