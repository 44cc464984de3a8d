#include "vsrpp/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace vsrpp;

namespace {

ModelWeights scalar_weights(float main_value, float flow_value) {
  ModelWeights w;
  w.add("net.w", Tensorf::Constant({1}, main_value));
  w.add("flow.w", Tensorf::Constant({1}, flow_value));
  return w;
}

// Reference Adam on one scalar, written from the recurrence.
double adam_reference(double p, const std::vector<double>& grads, double lr) {
  double m = 0, v = 0;
  for (size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, double(t)));
    const double vh = v / (1 - std::pow(0.999, double(t)));
    p -= lr * mh / (std::sqrt(vh) + 1e-8);
  }
  return p;
}

}  // namespace

TEST(Adam, FirstStepMovesByLr) {
  OptimizerState opt({ParamGroup{"main", "", 0.1}});
  ModelWeights w;
  w.add("x", Tensorf::Constant({1}, 1.f));
  GradientMap<float> g{{"x", Tensorf::Constant({1}, 1.f)}};
  opt.adam_step(w, g, {0.1});
  EXPECT_NEAR(w.at("x")[0] - 1.0, -0.1, 1e-6);
  EXPECT_EQ(opt.step(), 1);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  OptimizerState opt({ParamGroup{"main", "", 0.1}});
  ModelWeights w;
  w.add("x", Tensorf::Constant({2, 2}, 0.5f));
  const ModelWeights before = w;
  GradientMap<float> g{{"x", Tensorf::Zeros({2, 2})}};
  for (int i = 0; i < 3; ++i) opt.adam_step(w, g, {0.1});
  EXPECT_EQ(w, before);
}

TEST(Adam, MatchesRecurrence) {
  OptimizerState opt({ParamGroup{"main", "", 0.01}});
  ModelWeights w;
  w.add("x", Tensorf::Constant({1}, 0.3f));
  const std::vector<double> grads = {0.5, -0.2, 0.9, 0.1, -1.3};
  for (double gv : grads) opt.adam_step(w, {{"x", Tensorf::Constant({1}, float(gv))}}, {0.01});
  EXPECT_NEAR(w.at("x")[0], adam_reference(0.3, grads, 0.01), 1e-6);
}

TEST(Adam, StepCounterIncreases) {
  OptimizerState opt({ParamGroup{"main", "", 0.1}});
  ModelWeights w;
  w.add("x", Tensorf::Constant({1}, 0.f));
  for (int i = 1; i <= 4; ++i) {
    opt.adam_step(w, {{"x", Tensorf::Constant({1}, 1.f)}}, {0.1});
    EXPECT_EQ(opt.step(), i);
  }
}

TEST(Adam, TwoGroupsUseOwnRates) {
  OptimizerState opt = OptimizerState::two_group(1e-4, 2.5e-5);
  ModelWeights w = scalar_weights(0.f, 0.f);
  EXPECT_EQ(opt.groups()[opt.group_of("flow.w")].name, "flow");
  EXPECT_EQ(opt.groups()[opt.group_of("net.w")].name, "main");
  GradientMap<float> g{{"net.w", Tensorf::Constant({1}, 1.f)}, {"flow.w", Tensorf::Constant({1}, 1.f)}};
  std::vector<double> lr;
  for (const auto& grp : opt.groups()) lr.push_back(grp.base_lr);
  opt.adam_step(w, g, lr);
  EXPECT_NEAR(w.at("net.w")[0], -1e-4, 1e-9);
  EXPECT_NEAR(w.at("flow.w")[0], -2.5e-5, 1e-9);
}

TEST(Adam, FrozenGroupUntouched) {
  OptimizerState opt = OptimizerState::two_group(1e-3, 1e-3);
  ModelWeights w = scalar_weights(1.f, 1.f);
  EXPECT_TRUE(freeze_flow(opt, 0, 10));
  EXPECT_FALSE(opt.trainable("flow.w"));
  EXPECT_TRUE(opt.trainable("net.w"));
  GradientMap<float> g{{"net.w", Tensorf::Constant({1}, 1.f)}};
  opt.adam_step(w, g, {1e-3, 1e-3});
  EXPECT_EQ(w.at("flow.w")[0], 1.f);
  EXPECT_LT(w.at("net.w")[0], 1.f);
}

TEST(Cosine, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 1e-4), 1e-4);
  EXPECT_NEAR(cosine_lr(100, 100, 1e-4), 0.0, 1e-20);
  EXPECT_NEAR(cosine_lr(50, 100, 1e-4), 5e-5, 1e-18);
  EXPECT_NEAR(cosine_lr(150, 100, 1e-4), 0.0, 1e-20);
}

TEST(Cosine, Monotone) {
  double prev = cosine_lr(0, 37, 1.0);
  for (int s = 1; s <= 37; ++s) {
    const double now = cosine_lr(s, 37, 1.0);
    EXPECT_LE(now, prev);
    prev = now;
  }
}

TEST(Freeze, Window) {
  OptimizerState opt = OptimizerState::two_group();
  EXPECT_TRUE(freeze_flow(opt, 0, 100));
  EXPECT_TRUE(freeze_flow(opt, 99, 100));
  EXPECT_FALSE(freeze_flow(opt, 100, 100));
  EXPECT_TRUE(opt.trainable("flow.conv1.weight"));
}
