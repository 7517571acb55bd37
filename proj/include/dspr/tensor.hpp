#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <ostream>

#include "dspr/error.hpp"

namespace dspr {

using Index = Eigen::Index;

struct Shape4 {
  Index n = 1;
  Index c = 1;
  Index h = 1;
  Index w = 1;

  Index size() const { return n * c * h * w; }
  Index plane() const { return h * w; }
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Shape4& s) {
  return os << '(' << s.n << ',' << s.c << ',' << s.h << ',' << s.w << ')';
}

/// Dense 4D array in (n, c, h, w) row-major order.
template <typename Scalar>
class Tensor4 {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using PlaneMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstPlaneMap =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor4() = default;

  explicit Tensor4(const Shape4& shape, Scalar fill = Scalar(0)) : shape_(shape) {
    if (shape.n < 1 || shape.c < 1 || shape.h < 1 || shape.w < 1)
      throw ShapeError("tensor dimensions must all be >= 1");
    data_ = Vector::Constant(shape.size(), fill);
  }

  Tensor4(const Shape4& shape, Vector data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape.size()) throw ShapeError("tensor data length does not match shape");
  }

  static Tensor4 zeros(const Shape4& shape) { return Tensor4(shape); }

  const Shape4& shape() const { return shape_; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }

  Scalar& operator()(Index n, Index c, Index h, Index w) { return data_[offset(n, c, h, w)]; }
  Scalar operator()(Index n, Index c, Index h, Index w) const { return data_[offset(n, c, h, w)]; }

  Scalar* plane_ptr(Index n, Index c) { return data_.data() + (n * shape_.c + c) * shape_.plane(); }
  const Scalar* plane_ptr(Index n, Index c) const {
    return data_.data() + (n * shape_.c + c) * shape_.plane();
  }

  /// h x w view of one channel.
  PlaneMap plane(Index n, Index c) { return PlaneMap(plane_ptr(n, c), shape_.h, shape_.w); }
  ConstPlaneMap plane(Index n, Index c) const {
    return ConstPlaneMap(plane_ptr(n, c), shape_.h, shape_.w);
  }

  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor4<Other> cast() const {
    return Tensor4<Other>(shape_, data_.template cast<Other>());
  }

 private:
  Index offset(Index n, Index c, Index h, Index w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  Shape4 shape_{0, 0, 0, 0};
  Vector data_;
};

}  // namespace dspr
