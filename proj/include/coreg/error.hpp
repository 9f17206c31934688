#pragma once

#include <stdexcept>
#include <string>

namespace coreg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raster dimensions missing or inconsistent between inputs.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

/// A proposed split is not a valid two-part 4-connected partition.
class InvalidPartition : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

/// Region too small to be split.
class NoSplitError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing input data (files, rasters).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace coreg
