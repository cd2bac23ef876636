#pragma once

#include <stdexcept>
#include <string>

namespace gravtrack {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric parameter lies outside its documented range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A file could not be decoded, or uses an unsupported layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input data is inconsistent (missing frames, mismatched sizes, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Configuration file could not be parsed or contains unknown keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gravtrack
