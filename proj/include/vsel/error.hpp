#pragma once

#include <stdexcept>
#include <string>

namespace vsel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or grid dimensions do not agree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A file could not be parsed (bad magic, truncated payload, malformed JSON/CSV).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a precondition (empty sets, zero variance, missing condition).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or missing path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vsel
