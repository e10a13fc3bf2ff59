#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace coordnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input record. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A value outside the documented domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A statistic is undefined on the given data (zero variance, too few samples, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace coordnet
