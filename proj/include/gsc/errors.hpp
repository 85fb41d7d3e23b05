#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gsc {

/// Base class for every error raised by the codec library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Malformed model file. Carries the byte offset where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Malformed or truncated compressed stream.
class DecodeError : public Error {
 public:
  using Error::Error;
};

}  // namespace gsc
