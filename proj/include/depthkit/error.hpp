#pragma once

#include <stdexcept>
#include <string>

namespace depthkit {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file does not follow its declared format (bad header, truncated data, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Dimensions or values that do not fit the target representation.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Input that is well formed but on which a quantity is undefined
/// (no valid pixels, constant predictions, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters or settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Array shapes that do not agree with each other.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace depthkit
