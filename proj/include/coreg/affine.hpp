#pragma once

#include <Eigen/Core>

namespace coreg {

/// Maps pixel coordinates (x, y) of one grid onto another: p' = linear * p + translation.
struct AffineTransform {
  Eigen::Matrix2d linear = Eigen::Matrix2d::Identity();
  Eigen::Vector2d translation = Eigen::Vector2d::Zero();

  static AffineTransform identity() { return {}; }

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const { return linear * p + translation; }
  bool invertible() const;
  /// Throws DomainError when |det| <= 1e-9.
  AffineTransform inverse() const;
  AffineTransform compose(const AffineTransform& first) const;  // this after first
};

}  // namespace coreg
