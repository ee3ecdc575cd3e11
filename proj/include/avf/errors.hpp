#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace avf {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A scalar argument is outside its domain (e.g. temperature <= 0).
class ParameterError : public Error {
public:
  using Error::Error;
};

/// A NaN or Inf showed up where finite values are required.
class NumericError : public Error {
public:
  using Error::Error;
};

/// Inconsistent configuration (mode/params mismatch, empty split, bad key).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Malformed binary or text payload.
class FormatError : public Error {
public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

/// File system failure.
class IoError : public Error {
public:
  using Error::Error;
};

} // namespace avf
