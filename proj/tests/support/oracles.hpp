#pragma once

// Naive reference implementations and checking helpers shared by the unit
// tests and the acceptance run. Everything here is written as direct loops
// in double precision, independently of the library kernels.

#include "vsrpp/align.hpp"
#include "vsrpp/params.hpp"

#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace vsrpp::oracle {

Tensord conv2d(const Tensord& x, const Tensord& w, const Tensord* b, Index stride, Index pad);

/// Value of plane (n, c) at real position (py, px), zero outside.
double bilinear_at(const Tensord& x, Index n, Index c, double py, double px);

/// coords: N x 2 x Ho x Wo absolute (x, y).
Tensord bilinear_sample(const Tensord& x, const Tensord& coords);
Tensord warp(const Tensord& x, const Tensord& flow);

/// Offsets channel (g * taps + k) * 2 + {0: dy, 1: dx}; mask g * taps + k.
Tensord deform_conv2d(const Tensord& x, const Tensord& w, const Tensord* b, const Tensord& offsets,
                      const Tensord& masks, Index groups, Index stride, Index pad);

Tensord pixel_shuffle(const Tensord& x, Index r);

Tensord concat(const std::vector<Tensord>& parts);
Tensord leaky_relu(const Tensord& x, double slope = 0.1);

/// Flow-guided alignment written out with explicit (group, tap, coord)
/// indexing: group g reads neighbour g / (G / n); coord 0 is dy and takes
/// flow channel 1, coord 1 is dx and takes flow channel 0.
Tensord align(const ParameterStore<double>& params, const std::string& prefix, const AlignmentSpec& spec,
              const Tensord& anchor, const std::vector<Tensord>& prev, const std::vector<Tensord>& flows,
              Tensord* offsets = nullptr, Tensord* masks = nullptr, Tensord* raw_offsets = nullptr);

/// max |a - b| / max(max |b|, floor).
double max_rel_error(const Tensord& a, const Tensord& b, double floor = 1e-12);

template <typename Scalar>
Tensord to_double(const Tensor<Scalar>& t) {
  return t.template cast<double>();
}

using DoubleOp = std::function<Vard(const std::vector<Vard>&)>;

struct GradCheck {
  /// Norm-wise relative error per input: max |analytic - numeric| / max |numeric|.
  std::vector<double> rel_error;
  double worst() const;
};

/// Central finite differences (step h) of sum(op(inputs) * R) for a fixed
/// random R, against the graph's analytic gradients. `probe` limits the
/// number of perturbed entries per input (0 = all).
GradCheck check_gradients(const DoubleOp& op, const std::vector<Tensord>& inputs, std::uint64_t seed,
                          double h = 1e-4, Index probe = 0);

/// Same check over a named parameter store: `build` binds what it needs
/// through the binder. Returns the error per parameter name.
using StoreOp = std::function<Vard(ParamBinder<double>&)>;
std::map<std::string, double> check_store_gradients(const StoreOp& build, const ParameterStore<double>& store,
                                                    std::uint64_t seed, double h = 1e-4, Index probe = 0);

/// Uniform values whose distance to the nearest integer is at least `margin`.
Tensord non_integer_uniform(const Shape& shape, std::mt19937_64& rng, double lo, double hi, double margin = 0.05);

/// Uniform values with |v| >= margin (away from activation kinks at 0).
Tensord away_from_zero(const Shape& shape, std::mt19937_64& rng, double scale = 1.0, double margin = 0.02);

}  // namespace vsrpp::oracle
