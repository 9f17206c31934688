#include "coreg/fields.hpp"

#include "coreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace coreg {

void ScalarField::validate() const {
  if (width <= 0 || height <= 0) throw DimensionError("scalar field has empty dimensions");
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw DimensionError("scalar field value count does not match width*height");
  for (double v : values)
    if (!std::isfinite(v)) throw DataError("scalar field contains a non-finite value");
}

void QuatField::validate() const {
  if (width <= 0 || height <= 0) throw DimensionError("quaternion field has empty dimensions");
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw DimensionError("quaternion field value count does not match width*height");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::abs(values[i].norm() - 1.0) > 1e-6)
      throw DataError("quaternion at pixel " + std::to_string(i) + " is not unit length");
  }
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](auto v) { return v != 0; }));
}

}  // namespace coreg
