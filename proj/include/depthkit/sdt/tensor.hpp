#pragma once

#include <Eigen/Core>

namespace depthkit::sdt {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Channel-major feature map: `data` is channels x (height * width) with each
/// row holding one channel plane in row-major order.
template <typename Scalar>
struct FeatureMap {
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  RowMatrix<Scalar> data;

  static FeatureMap Zero(Eigen::Index channels, Eigen::Index height, Eigen::Index width) {
    return {height, width, RowMatrix<Scalar>::Zero(channels, height * width)};
  }

  Eigen::Index channels() const { return data.rows(); }
  Eigen::Index pixels() const { return height * width; }

  Scalar& operator()(Eigen::Index c, Eigen::Index y, Eigen::Index x) { return data(c, y * width + x); }
  Scalar operator()(Eigen::Index c, Eigen::Index y, Eigen::Index x) const { return data(c, y * width + x); }

  Eigen::Map<RowMatrix<Scalar>> plane(Eigen::Index c) {
    return {data.row(c).data(), height, width};
  }
  Eigen::Map<const RowMatrix<Scalar>> plane(Eigen::Index c) const {
    return {data.row(c).data(), height, width};
  }
};

}  // namespace depthkit::sdt
