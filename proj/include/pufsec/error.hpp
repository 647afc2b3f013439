#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pufsec {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad stage count, empty data...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Feature / vector widths disagree.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based, 0 when the whole file is at fault.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace pufsec
