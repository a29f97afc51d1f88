#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace inopca {

/// Invalid user input: bad flags, malformed spec strings, out-of-range parameters,
/// unreadable or malformed files. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input file content could not be parsed. Carries the 1-based location when known.
class ParseError : public ConfigError {
public:
  ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
      : ConfigError(what), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t row_;
  std::size_t column_;
};

/// A computation left its valid numerical regime (degenerate iterate, blow-up,
/// unstable PDE step). Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A stepper hit a degenerate state (zero-norm iterate, λ under the floor).
class DegeneracyError : public NumericalError {
public:
  DegeneracyError(const std::string& what, std::int64_t step)
      : NumericalError(what + " at step " + std::to_string(step)), step_(step) {}

  std::int64_t step() const noexcept { return step_; }

private:
  std::int64_t step_;
};

/// Raised for arguments outside a function's mathematical domain (λ ≤ 0 in the ODE, ω = 0
/// for the optimal initial norm).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

} // namespace inopca
