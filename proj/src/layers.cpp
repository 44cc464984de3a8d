#include "vsrpp/layers.hpp"

#include <cmath>
#include <random>

namespace vsrpp {

void ParamLayout::add_conv(const std::string& name, const ConvSpec& spec, double gain) {
  const Index fan_in = spec.in_channels * spec.taps();
  add({name + ".weight", spec.weight_shape(), gain, fan_in});
  if (spec.has_bias) add({name + ".bias", {spec.out_channels}, 0.0, fan_in});
}

Index ParamLayout::param_count() const {
  Index n = 0;
  for (const auto& d : decls_) n += shape_numel(d.shape);
  return n;
}

ModelWeights ParamLayout::initialise(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  ModelWeights weights;
  for (const auto& d : decls_) {
    if (d.init_gain == 0.0) {
      weights.add(d.name, Tensorf(d.shape));
      continue;
    }
    const double bound = d.init_gain / std::sqrt(static_cast<double>(d.fan_in));
    weights.add(d.name, Tensorf::Uniform(d.shape, rng, static_cast<float>(-bound), static_cast<float>(bound)));
  }
  return weights;
}

void declare_residual_block(ParamLayout& layout, const std::string& name, Index channels) {
  // Residual branches start at 0.1x the default bound.
  layout.add_conv(name + ".conv1", ConvSpec::same(channels, channels), 0.1);
  layout.add_conv(name + ".conv2", ConvSpec::same(channels, channels), 0.1);
}

void declare_residual_stack(ParamLayout& layout, const std::string& name, Index in, Index out, int blocks) {
  layout.add_conv(name + ".conv_in", ConvSpec::same(in, out));
  for (int b = 0; b < blocks; ++b) declare_residual_block(layout, name + ".block" + std::to_string(b), out);
}

}  // namespace vsrpp
