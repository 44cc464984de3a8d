#pragma once

#include "vsrpp/params.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vsrpp {

/// One learnable tensor: its name, shape and initialisation. A zero
/// `init_gain` means zero initialisation; otherwise weights are drawn
/// uniformly with bound gain / sqrt(fan_in).
struct ParamDecl {
  std::string name;
  Shape shape;
  double init_gain = 0.0;
  Index fan_in = 1;
};

/// Ordered list of parameter declarations for a model.
class ParamLayout {
 public:
  void add(ParamDecl decl) { decls_.push_back(std::move(decl)); }

  /// Declares `<name>.weight` (and `<name>.bias` if the spec has one).
  void add_conv(const std::string& name, const ConvSpec& spec, double gain = 1.0);

  const std::vector<ParamDecl>& decls() const { return decls_; }
  Index param_count() const;

  /// Fresh weights, deterministic in `seed`.
  ModelWeights initialise(std::uint64_t seed) const;

 private:
  std::vector<ParamDecl> decls_;
};

template <typename Scalar>
Var<Scalar> apply_conv(ParamBinder<Scalar>& params, const std::string& name, const ConvSpec& spec,
                       const Var<Scalar>& x) {
  return conv2d(x, params(name + ".weight"), spec.has_bias ? params(name + ".bias") : Var<Scalar>(), spec);
}

/// conv -> ReLU -> conv with identity skip, no normalisation.
void declare_residual_block(ParamLayout& layout, const std::string& name, Index channels);

template <typename Scalar>
Var<Scalar> apply_residual_block(ParamBinder<Scalar>& params, const std::string& name, Index channels,
                                 const Var<Scalar>& x) {
  const ConvSpec spec = ConvSpec::same(channels, channels);
  Var<Scalar> h = relu(apply_conv(params, name + ".conv1", spec, x));
  return x + apply_conv(params, name + ".conv2", spec, h);
}

/// Input conv to `out` channels with LeakyReLU(0.1), then `blocks`
/// residual blocks.
void declare_residual_stack(ParamLayout& layout, const std::string& name, Index in, Index out, int blocks);

template <typename Scalar>
Var<Scalar> apply_residual_stack(ParamBinder<Scalar>& params, const std::string& name, Index in, Index out,
                                 int blocks, const Var<Scalar>& x) {
  Var<Scalar> h = leaky_relu(apply_conv(params, name + ".conv_in", ConvSpec::same(in, out), x), Scalar(0.1));
  for (int b = 0; b < blocks; ++b) h = apply_residual_block(params, name + ".block" + std::to_string(b), out, h);
  return h;
}

}  // namespace vsrpp
