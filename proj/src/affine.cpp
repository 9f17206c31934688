#include "coreg/affine.hpp"

#include "coreg/error.hpp"

#include <Eigen/LU>
#include <cmath>

namespace coreg {

bool AffineTransform::invertible() const { return std::abs(linear.determinant()) > 1e-9; }

AffineTransform AffineTransform::inverse() const {
  if (!invertible()) throw DomainError("affine transform is not invertible");
  AffineTransform inv;
  inv.linear = linear.inverse();
  inv.translation = -inv.linear * translation;
  return inv;
}

AffineTransform AffineTransform::compose(const AffineTransform& first) const {
  AffineTransform out;
  out.linear = linear * first.linear;
  out.translation = linear * first.translation + translation;
  return out;
}

}  // namespace coreg
