#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace coreg {

/// Unit quaternion stored as (w, x, y, z).
using Quat = Eigen::Vector4d;

/// Pixel values of the scalar (BSE-like) modality, row-major.
struct ScalarField {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  ScalarField() = default;
  ScalarField(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t size() const { return values.size(); }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

  /// Throws DimensionError / DataError when the invariants do not hold.
  void validate() const;
};

/// Pixel values of the orientation (EBSD-like) modality, one unit quaternion per pixel.
struct QuatField {
  int width = 0;
  int height = 0;
  std::vector<Quat> values;

  QuatField() = default;
  QuatField(int w, int h)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, Quat(1, 0, 0, 0)) {}

  std::size_t size() const { return values.size(); }
  Quat& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  const Quat& at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

  /// Every quaternion must have unit norm within 1e-6.
  void validate() const;
};

/// Integer label per pixel; labels need not be dense or connected.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> labels;

  LabelMap() = default;
  LabelMap(int w, int h, std::int32_t fill = 0)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {}

  std::int32_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::int32_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return labels.size(); }
};

/// Binary foreground raster, used for global pre-alignment.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;
};

}  // namespace coreg
