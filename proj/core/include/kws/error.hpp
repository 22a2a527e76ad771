#pragma once

#include <stdexcept>
#include <string>

namespace kws {

/// Base class for every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (WAV headers, checkpoint magic, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Dataset layout or sample problems.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes that do not line up for an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint whose layer names or shapes disagree with the requested architecture.
class MismatchError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values in a loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or unknown names supplied by a caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace kws
