#include "vsrpp/align.hpp"

namespace vsrpp {

void AlignmentSpec::validate() const {
  if (neighbours != 1 && neighbours != 2) {
    throw std::invalid_argument("alignment: neighbours must be 1 or 2, got " + std::to_string(neighbours));
  }
  if (channels < 1 || groups < 1) throw std::invalid_argument("alignment: channels and groups must be positive");
  if (groups % neighbours != 0 || dcn_in() % groups != 0) {
    throw std::invalid_argument("alignment: " + std::to_string(groups) + " deformable groups cannot split " +
                                std::to_string(neighbours) + " x " + std::to_string(channels) + " channels evenly");
  }
}

template <typename Scalar>
Tensor<Scalar> AlignmentBundle<Scalar>::offsets_for(int p) const {
  if (p < 1 || p > neighbours) throw std::out_of_range("offsets_for: no neighbour " + std::to_string(p));
  const Index n = offsets.channels() / neighbours;
  return slice_channels(offsets, (p - 1) * n, n);
}

template <typename Scalar>
Tensor<Scalar> AlignmentBundle<Scalar>::masks_for(int p) const {
  if (p < 1 || p > neighbours) throw std::out_of_range("masks_for: no neighbour " + std::to_string(p));
  const Index n = masks.channels() / neighbours;
  return slice_channels(masks, (p - 1) * n, n);
}

void declare_alignment(ParamLayout& layout, const std::string& prefix, const AlignmentSpec& spec) {
  spec.validate();
  const Index c = spec.channels;
  layout.add_conv(prefix + ".conv0", ConvSpec::same(spec.estimator_in(), c));
  layout.add_conv(prefix + ".conv1", ConvSpec::same(c, c));
  layout.add_conv(prefix + ".conv2", ConvSpec::same(c, c));
  layout.add_conv(prefix + ".offset", ConvSpec::same(c, spec.offset_channels()), 0.0);
  layout.add_conv(prefix + ".mask", ConvSpec::same(c, spec.mask_channels()), 0.0);
  layout.add_conv(prefix + ".dcn", spec.dcn_spec());
}

template <typename Scalar>
AlignmentBundle<Scalar> split_offsets(const Tensor<Scalar>& raw_offsets, const Tensor<Scalar>& raw_masks,
                                      const std::vector<const Tensor<Scalar>*>& flows) {
  const Index taps = AlignmentSpec::kTaps;
  const Index shares = static_cast<Index>(flows.size());
  if (shares < 1 || raw_offsets.channels() % (2 * taps * shares) != 0 ||
      raw_masks.channels() * 2 != raw_offsets.channels()) {
    throw DimensionError("split_offsets: " + std::to_string(raw_offsets.channels()) + " offset and " +
                         std::to_string(raw_masks.channels()) + " mask channels do not fit " +
                         std::to_string(shares) + " neighbours");
  }
  AlignmentBundle<Scalar> bundle;
  bundle.neighbours = static_cast<int>(shares);
  bundle.offsets = add_flow_to_offsets(raw_offsets, std::span<const Tensor<Scalar>* const>(flows), taps);
  bundle.masks = sigmoid(raw_masks);
  return bundle;
}

namespace {

template <typename Scalar>
Var<Scalar> estimator_trunk(ParamBinder<Scalar>& params, const std::string& prefix, const AlignmentSpec& spec,
                            const Var<Scalar>& input) {
  const Index c = spec.channels;
  Var<Scalar> h = leaky_relu(apply_conv(params, prefix + ".conv0", ConvSpec::same(spec.estimator_in(), c), input));
  h = leaky_relu(apply_conv(params, prefix + ".conv1", ConvSpec::same(c, c), h));
  return leaky_relu(apply_conv(params, prefix + ".conv2", ConvSpec::same(c, c), h));
}

template <typename Scalar>
Var<Scalar> align_impl(ParamBinder<Scalar>& params, const std::string& prefix, const AlignmentSpec& spec,
                       const Var<Scalar>& anchor, const std::vector<Var<Scalar>>& prev,
                       const std::vector<Var<Scalar>>& flows, AlignmentBundle<Scalar>* bundle) {
  spec.validate();
  if (static_cast<int>(prev.size()) != spec.neighbours || prev.size() != flows.size()) {
    throw DimensionError("align: expected " + std::to_string(spec.neighbours) + " neighbours");
  }
  const Tensor<Scalar>& a = anchor.value();
  require_nchw(a, "align anchor");
  if (a.channels() != spec.channels) {
    throw DimensionError("align: anchor has " + std::to_string(a.channels()) + " channels, expected " +
                         std::to_string(spec.channels));
  }
  for (size_t p = 0; p < prev.size(); ++p) {
    require_same_shape(a, prev[p].value(), "align neighbour feature");
    if (flows[p].shape() != Shape{a.batch(), 2, a.height(), a.width()}) {
      throw DimensionError("align: flow shape " + shape_string(flows[p].shape()) + " does not match features " +
                           shape_string(a.shape()));
    }
  }

  std::vector<Var<Scalar>> est_in{anchor};
  for (size_t p = 0; p < prev.size(); ++p) est_in.push_back(warp(prev[p], flows[p]));
  for (const auto& f : flows) est_in.push_back(f);
  Var<Scalar> trunk = estimator_trunk(params, prefix, spec, concat(est_in));

  const Index c = spec.channels;
  Var<Scalar> residual = apply_conv(params, prefix + ".offset", ConvSpec::same(c, spec.offset_channels()), trunk);
  Var<Scalar> offsets = add_flow_to_offsets(residual, flows, AlignmentSpec::kTaps);
  Var<Scalar> masks = sigmoid(apply_conv(params, prefix + ".mask", ConvSpec::same(c, spec.mask_channels()), trunk));
  if (bundle) {
    bundle->offsets = offsets.value();
    bundle->masks = masks.value();
    bundle->neighbours = spec.neighbours;
  }

  const ConvSpec dcn = spec.dcn_spec();
  Var<Scalar> features = prev.size() == 1 ? prev[0] : concat(prev);
  return deform_conv2d(features, params(prefix + ".dcn.weight"), params(prefix + ".dcn.bias"), offsets, masks,
                       spec.groups, dcn);
}

}  // namespace

template <typename Scalar>
Var<Scalar> align_second_order(ParamBinder<Scalar>& params, const std::string& prefix, const AlignmentSpec& spec,
                               const Var<Scalar>& anchor, const Var<Scalar>& prev1, const Var<Scalar>& prev2,
                               const Var<Scalar>& flow1, const Var<Scalar>& flow2, AlignmentBundle<Scalar>* bundle) {
  if (spec.neighbours != 2) throw std::invalid_argument("align_second_order: spec must have 2 neighbours");
  return align_impl(params, prefix, spec, anchor, {prev1, prev2}, {flow1, flow2}, bundle);
}

template <typename Scalar>
Var<Scalar> align_first_order(ParamBinder<Scalar>& params, const std::string& prefix, const AlignmentSpec& spec,
                              const Var<Scalar>& anchor, const Var<Scalar>& prev1, const Var<Scalar>& flow1,
                              AlignmentBundle<Scalar>* bundle) {
  if (spec.neighbours != 1) throw std::invalid_argument("align_first_order: spec must have 1 neighbour");
  return align_impl(params, prefix, spec, anchor, {prev1}, {flow1}, bundle);
}

#define VSRPP_INSTANTIATE_ALIGN(T)                                                                              \
  template struct AlignmentBundle<T>;                                                                           \
  template AlignmentBundle<T> split_offsets(const Tensor<T>&, const Tensor<T>&,                                 \
                                            const std::vector<const Tensor<T>*>&);                              \
  template Var<T> align_second_order(ParamBinder<T>&, const std::string&, const AlignmentSpec&, const Var<T>&,  \
                                     const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&,                \
                                     AlignmentBundle<T>*);                                                      \
  template Var<T> align_first_order(ParamBinder<T>&, const std::string&, const AlignmentSpec&, const Var<T>&,   \
                                    const Var<T>&, const Var<T>&, AlignmentBundle<T>*);

VSRPP_INSTANTIATE_ALIGN(float)
VSRPP_INSTANTIATE_ALIGN(double)

}  // namespace vsrpp
