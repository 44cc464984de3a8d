#pragma once

// Define-by-run reverse-mode differentiation over the tensor kernels.
//
// A Var wraps a node holding its value. Nodes created from trainable
// parameters, and every op result that depends on one, are appended to the
// owning Graph in execution order; Graph::backward walks that tape in exact
// reverse. Ops whose inputs are all constants record nothing, so inference
// runs through the same code path without keeping activations alive.

#include "vsrpp/kernels.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace vsrpp {

/// API misuse, e.g. backward from a non-scalar.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename Scalar>
class Graph;

template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  bool requires_grad = false;
  std::string name;
  std::function<void(const Tensor<Scalar>&)> backward;

  void accumulate(const Tensor<Scalar>& g);
  void accumulate(Tensor<Scalar>&& g);
};

template <typename Scalar>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<Scalar>> node, Graph<Scalar>* graph = nullptr)
      : node_(std::move(node)), graph_(graph) {}

  static Var constant(Tensor<Scalar> value) {
    auto n = std::make_shared<Node<Scalar>>();
    n->value = std::move(value);
    return Var(std::move(n));
  }

  explicit operator bool() const { return node_ != nullptr; }
  const Tensor<Scalar>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Graph<Scalar>* graph() const { return graph_; }
  const std::shared_ptr<Node<Scalar>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<Scalar>> node_;
  Graph<Scalar>* graph_ = nullptr;
};

using Varf = Var<float>;
using Vard = Var<double>;

template <typename Scalar>
using GradientMap = std::map<std::string, Tensor<Scalar>>;

template <typename Scalar>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Leaf for a named parameter. Non-trainable leaves behave as constants.
  Var<Scalar> parameter(std::string name, Tensor<Scalar> value, bool trainable = true);

  /// Records an op result; `backward` receives the output gradient.
  Var<Scalar> record(Tensor<Scalar> value, bool requires_grad,
                     std::function<void(const Tensor<Scalar>&)> backward);

  /// Gradients of a scalar loss for every trainable leaf, keyed by name.
  /// Consumes the tape.
  GradientMap<Scalar> backward(const Var<Scalar>& loss);

  void reset();
  size_t tape_size() const { return tape_.size(); }
  size_t leaf_count() const { return leaves_.size(); }

 private:
  std::vector<std::shared_ptr<Node<Scalar>>> tape_;
  std::vector<std::shared_ptr<Node<Scalar>>> leaves_;
};

// Differentiable ops. An empty Var as bias means "no bias".

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias, const ConvSpec& spec);

template <typename Scalar>
Var<Scalar> deform_conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias,
                          const Var<Scalar>& offsets, const Var<Scalar>& masks, Index groups,
                          const ConvSpec& spec);

template <typename Scalar>
Var<Scalar> warp(const Var<Scalar>& feature, const Var<Scalar>& flow);

template <typename Scalar>
Var<Scalar> leaky_relu(const Var<Scalar>& x, Scalar slope = Scalar(0.1));

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x);

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x);

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b);

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b);

/// Elementwise product.
template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b);

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& x, Scalar factor);

template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>>& parts);

template <typename Scalar>
Var<Scalar> slice(const Var<Scalar>& x, Index begin, Index count);

template <typename Scalar>
Var<Scalar> pixel_shuffle(const Var<Scalar>& x, Index factor);

/// Deformable offsets = residual + flows broadcast over (group, tap) slots.
template <typename Scalar>
Var<Scalar> add_flow_to_offsets(const Var<Scalar>& residual, const std::vector<Var<Scalar>>& flows, Index taps);

/// Sum of all elements as a scalar.
template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x);

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& x);

/// mean(sqrt((pred - target)^2 + eps^2)).
template <typename Scalar>
Var<Scalar> charbonnier(const Var<Scalar>& pred, const Var<Scalar>& target, Scalar eps = Scalar(1e-8));

template <typename Scalar>
Scalar charbonnier_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, Scalar eps = Scalar(1e-8));

}  // namespace vsrpp
