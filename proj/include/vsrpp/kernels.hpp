#pragma once

// Forward and backward numerical kernels over NCHW tensors.
//
// Conventions shared by every kernel:
//   * convolutions are cross-correlations with zero padding;
//   * sampling outside the image reads zeros;
//   * flow and coordinate fields keep x (horizontal) in channel 0 and
//     y (vertical) in channel 1;
//   * deformable-convolution offsets are laid out per group, per tap,
//     y then x: channel (g * taps + k) * 2 + {0: dy, 1: dx}, and masks
//     use channel g * taps + k, with tap k = ky * kernel_w + kx.

#include "vsrpp/tensor.hpp"

#include <span>

namespace vsrpp {

struct ConvSpec {
  Index in_channels = 1;
  Index out_channels = 1;
  Index kernel_h = 3;
  Index kernel_w = 3;
  Index stride = 1;
  Index padding = 1;
  bool has_bias = true;

  /// Same-size convolution with an odd square kernel.
  static ConvSpec same(Index in, Index out, Index kernel = 3, bool bias = true) {
    return ConvSpec{in, out, kernel, kernel, 1, kernel / 2, bias};
  }

  Index out_size(Index in, Index k) const { return (in + 2 * padding - k) / stride + 1; }
  Index out_height(Index h) const { return out_size(h, kernel_h); }
  Index out_width(Index w) const { return out_size(w, kernel_w); }
  Index taps() const { return kernel_h * kernel_w; }
  Index weight_count() const { return out_channels * in_channels * taps(); }
  Index param_count() const { return weight_count() + (has_bias ? out_channels : 0); }
  Shape weight_shape() const { return {out_channels, in_channels, kernel_h, kernel_w}; }
};

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
};

template <typename Scalar>
struct SampleGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> coords;
};

template <typename Scalar>
struct DeformGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
  Tensor<Scalar> offsets;
  Tensor<Scalar> masks;
};

/// Which gradients a backward kernel should produce.
struct GradRequest {
  bool input = true;
  bool weight = true;
  bool bias = true;
  bool offsets = true;
  bool masks = true;
};

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight, const Tensor<Scalar>* bias,
                      const ConvSpec& spec);

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                                  const Tensor<Scalar>& grad_out, const ConvSpec& spec,
                                  GradRequest want = {});

/// Bilinear sampling at absolute pixel coordinates (N x 2 x Ho x Wo).
template <typename Scalar>
Tensor<Scalar> bilinear_sample(const Tensor<Scalar>& input, const Tensor<Scalar>& coords);

template <typename Scalar>
SampleGrads<Scalar> bilinear_sample_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& coords,
                                             const Tensor<Scalar>& grad_out, GradRequest want = {});

/// Samples feature at (x + flow_x, y + flow_y).
template <typename Scalar>
Tensor<Scalar> warp(const Tensor<Scalar>& feature, const Tensor<Scalar>& flow);

/// Returns {grad wrt feature, grad wrt flow}.
template <typename Scalar>
SampleGrads<Scalar> warp_backward(const Tensor<Scalar>& feature, const Tensor<Scalar>& flow,
                                  const Tensor<Scalar>& grad_out, GradRequest want = {});

/// Absolute sampling grid x + flow.
template <typename Scalar>
Tensor<Scalar> flow_to_coords(const Tensor<Scalar>& flow);

/// Modulated deformable convolution.
template <typename Scalar>
Tensor<Scalar> deform_conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight, const Tensor<Scalar>* bias,
                             const Tensor<Scalar>& offsets, const Tensor<Scalar>& masks, Index groups,
                             const ConvSpec& spec);

template <typename Scalar>
DeformGrads<Scalar> deform_conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                                           const Tensor<Scalar>& offsets, const Tensor<Scalar>& masks,
                                           Index groups, const Tensor<Scalar>& grad_out, const ConvSpec& spec,
                                           GradRequest want = {});

template <typename Scalar>
Tensor<Scalar> pixel_shuffle(const Tensor<Scalar>& input, Index factor);

template <typename Scalar>
Tensor<Scalar> pixel_unshuffle(const Tensor<Scalar>& input, Index factor);

template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& input, Scalar slope = Scalar(0.1));

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& input);

/// Bilinear resize with half-pixel centres (align_corners = false).
template <typename Scalar>
Tensor<Scalar> resize_bilinear(const Tensor<Scalar>& input, Index out_h, Index out_w);

template <typename Scalar>
Tensor<Scalar> concat_channels(std::span<const Tensor<Scalar>* const> parts);

template <typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& input, Index begin, Index count);

/// Adds flows to the deformable offsets: flows[p] is added to every
/// (group, tap) slot of the p-th equal share of the groups, swapping the
/// (x, y) flow order into the (dy, dx) offset order.
template <typename Scalar>
Tensor<Scalar> add_flow_to_offsets(const Tensor<Scalar>& residual,
                                   std::span<const Tensor<Scalar>* const> flows, Index taps);

/// Sum over every (group, tap) slot of share p, in flow (x, y) order.
template <typename Scalar>
Tensor<Scalar> offsets_grad_to_flow(const Tensor<Scalar>& grad_offsets, Index shares, Index share,
                                    Index taps);

}  // namespace vsrpp
