#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vsrpp {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

/// Raised when tensor extents do not fit an operation's contract.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a kernel produces NaN or Inf from finite inputs.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_string(const Shape& shape);
Index shape_numel(const Shape& shape);

/// Dense row-major array over an arbitrary shape. Image tensors use
/// batch x channels x height x width.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(Storage::Zero(shape_numel(shape_))) {}
  Tensor(Shape shape, Scalar fill)
      : shape_(std::move(shape)), data_(Storage::Constant(shape_numel(shape_), fill)) {}
  Tensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor Zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor Constant(Shape shape, Scalar v) { return Tensor(std::move(shape), v); }

  template <typename Rng>
  static Tensor Uniform(Shape shape, Rng& rng, Scalar lo = Scalar(-1), Scalar hi = Scalar(1)) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
    for (Index i = 0; i < t.size(); ++i) t.data_[i] = static_cast<Scalar>(dist(rng));
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<size_t>(axis)); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Storage& array() { return data_; }
  const Storage& array() const { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar& operator()(Index n, Index c, Index h, Index w) { return data_[offset(n, c, h, w)]; }
  Scalar operator()(Index n, Index c, Index h, Index w) const { return data_[offset(n, c, h, w)]; }

  // NCHW accessors.
  Index batch() const { return dim(0); }
  Index channels() const { return dim(1); }
  Index height() const { return dim(2); }
  Index width() const { return dim(3); }
  Index plane_size() const { return dim(2) * dim(3); }

  /// Pointer to plane (n, c) of an NCHW tensor.
  Scalar* plane(Index n, Index c) { return data() + (n * dim(1) + c) * plane_size(); }
  const Scalar* plane(Index n, Index c) const { return data() + (n * dim(1) + c) * plane_size(); }

  /// Channels x (H*W) view of batch item n.
  MatrixMap item_matrix(Index n) { return MatrixMap(plane(n, 0), dim(1), plane_size()); }
  ConstMatrixMap item_matrix(Index n) const { return ConstMatrixMap(plane(n, 0), dim(1), plane_size()); }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && (a.data_ == b.data_).all();
  }

 private:
  Index offset(Index n, Index c, Index h, Index w) const {
    return ((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  Shape shape_;
  Storage data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

/// Throws DimensionError unless t has rank 4.
template <typename Scalar>
void require_nchw(const Tensor<Scalar>& t, std::string_view what) {
  if (t.rank() != 4) {
    throw DimensionError(std::string(what) + ": expected NCHW tensor, got shape " + shape_string(t.shape()));
  }
}

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, std::string_view what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

/// Throws NonFiniteError if the kernel output contains NaN or Inf.
template <typename Scalar>
void check_finite(const Tensor<Scalar>& t, std::string_view kernel) {
  if (!t.all_finite()) throw NonFiniteError(std::string(kernel) + ": produced a non-finite value");
}

}  // namespace vsrpp
