#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zibr {

// Argument outside the mathematical domain of a density or link.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Vector/matrix shapes that do not agree with the model dimensions.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input data. `line` is 1-based, 0 when not tied to a file line.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Unrecoverable numerical failure inside an iterative algorithm.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace zibr
