#pragma once

// Flow-guided deformable alignment.
//
// The offset/mask estimator sees the anchor feature g_i, the neighbour
// features pre-warped by their flows, and the flows themselves:
//
//   conv(n_in, C) -> LReLU -> conv(C, C) -> LReLU -> conv(C, C) -> LReLU
//     -> conv(C, 2 * G * 9)   residual offsets   (".offset")
//     -> conv(C, G * 9)       mask logits        (".mask")
//
// with n_in = 3C + 4 for two neighbours and 2C + 2 for one. Offsets are the
// residual plus the flow of the neighbour a group reads from; the
// deformable convolution (".dcn", G groups, 3x3) runs on the *unwarped*
// neighbour features concatenated along channels and outputs C channels.
// With two neighbours, groups [0, G/2) read the i-1 feature and
// [G/2, G) the i-2 feature, so offset channels [0, 9G) and mask channels
// [0, 9G/2) belong to the first neighbour.

#include "vsrpp/layers.hpp"

#include <string>
#include <vector>

namespace vsrpp {

struct AlignmentSpec {
  Index channels = 64;
  Index groups = 16;
  /// Number of neighbour features aligned jointly (1 or 2).
  int neighbours = 2;

  static constexpr Index kTaps = 9;

  Index estimator_in() const { return (neighbours + 1) * channels + 2 * neighbours; }
  Index dcn_in() const { return neighbours * channels; }
  Index offset_channels() const { return groups * kTaps * 2; }
  Index mask_channels() const { return groups * kTaps; }
  ConvSpec dcn_spec() const { return ConvSpec::same(dcn_in(), channels); }
  void validate() const;
};

/// Offsets and masks for one deformable convolution, with per-neighbour
/// views.
template <typename Scalar>
struct AlignmentBundle {
  Tensor<Scalar> offsets;
  Tensor<Scalar> masks;
  int neighbours = 2;

  /// Offsets of neighbour p (1-based), channels [(p-1) * n, p * n).
  Tensor<Scalar> offsets_for(int p) const;
  Tensor<Scalar> masks_for(int p) const;
};

void declare_alignment(ParamLayout& layout, const std::string& prefix, const AlignmentSpec& spec);

/// Flow-base offsets and sigmoid masks from raw estimator outputs.
template <typename Scalar>
AlignmentBundle<Scalar> split_offsets(const Tensor<Scalar>& raw_offsets, const Tensor<Scalar>& raw_masks,
                                      const std::vector<const Tensor<Scalar>*>& flows);

/// Aligns f_{i-1}, f_{i-2} to the anchor g_i with flows s1, s2.
/// If `bundle` is non-null it receives the offsets and masks used.
template <typename Scalar>
Var<Scalar> align_second_order(ParamBinder<Scalar>& params, const std::string& prefix, const AlignmentSpec& spec,
                               const Var<Scalar>& anchor, const Var<Scalar>& prev1, const Var<Scalar>& prev2,
                               const Var<Scalar>& flow1, const Var<Scalar>& flow2,
                               AlignmentBundle<Scalar>* bundle = nullptr);

template <typename Scalar>
Var<Scalar> align_first_order(ParamBinder<Scalar>& params, const std::string& prefix, const AlignmentSpec& spec,
                              const Var<Scalar>& anchor, const Var<Scalar>& prev1, const Var<Scalar>& flow1,
                              AlignmentBundle<Scalar>* bundle = nullptr);

}  // namespace vsrpp
