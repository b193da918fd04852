#pragma once

#include <stdexcept>
#include <string>

namespace moemo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or array shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented invariant (frame counts, finiteness, labels).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or mismatched interchange file.
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Bad configuration value or key.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace moemo
