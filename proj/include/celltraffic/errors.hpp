#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace celltraffic {

// Input that violates a precondition: bad ranges, empty masks, m + k > T, ...
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf produced during forward/backward or training.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Calling an operation out of order, e.g. backward before forward.
class UsageError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line, const std::string& file = {})
      : std::runtime_error((file.empty() ? "line " : file + ":") + std::to_string(line) + ": " + what),
        line_(line),
        detail_(what) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

private:
  std::size_t line_;
  std::string detail_;
};

}  // namespace celltraffic
