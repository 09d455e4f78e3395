#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tractfilter {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class InsufficientDirections : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Raised when every sample of a streamline falls outside the subject volumes.
class Unsampleable : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss during optimization.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed file. `offset` is the byte offset (binary formats) or the
/// 1-based row number (text formats) where parsing stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
  explicit FormatError(const std::string& what) : Error(what), offset_(0) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace tractfilter
