#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "vsel/error.hpp"

namespace vsel {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

/// Row-major 2-D grid, the storage type used for every map and image plane.
template <typename Scalar>
using GridT = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Grid = GridT<double>;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense n-dimensional array with row-major storage.
///
/// Rank-3 tensors are interpreted as channels x height x width. A tensor owns
/// its values; copies are deep.
template <typename Scalar>
class BasicTensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_ = Vector::Zero(shape_size(shape_));
  }

  BasicTensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (shape_size(shape_) != data_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  BasicTensor(Shape shape, std::initializer_list<Scalar> values)
      : BasicTensor(std::move(shape), Vector(Eigen::Map<const Vector>(
                                          values.begin(), static_cast<Index>(values.size())))) {}

  static BasicTensor constant(Shape shape, Scalar value) {
    BasicTensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }

  const Vector& values() const { return data_; }
  Vector& values() { return data_; }
  const Scalar* data() const { return data_.data(); }
  Scalar* data() { return data_.data(); }

  Scalar operator[](Index i) const { return data_[i]; }
  Scalar& operator[](Index i) { return data_[i]; }

  Index channels() const { return rank() == 3 ? shape_[0] : 1; }
  Index height() const { return rank() == 3 ? shape_[1] : (rank() == 2 ? shape_[0] : 1); }
  Index width() const { return rank() >= 2 ? shape_.back() : size(); }

  /// Read-only H x W view of channel c of a CHW tensor.
  Eigen::Map<const GridT<Scalar>> channel(Index c) const {
    return Eigen::Map<const GridT<Scalar>>(data_.data() + c * height() * width(), height(),
                                           width());
  }
  Eigen::Map<GridT<Scalar>> channel(Index c) {
    return Eigen::Map<GridT<Scalar>>(data_.data() + c * height() * width(), height(), width());
  }

  bool all_finite() const { return data_.allFinite(); }

  BasicTensor reshaped(Shape shape) const { return BasicTensor(std::move(shape), data_); }

  template <typename Other>
  BasicTensor<Other> cast() const {
    return BasicTensor<Other>(shape_, data_.template cast<Other>());
  }

  bool operator==(const BasicTensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  static void check_shape(const Shape& shape) {
    for (Index d : shape) {
      if (d <= 0) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape));
    }
  }

  Shape shape_;
  Vector data_;
};

using Tensor = BasicTensor<double>;

/// Stack H x W planes into a CHW tensor.
Tensor tensor_from_planes(const std::vector<Grid>& planes);

}  // namespace vsel
