#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace motbary {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Raised when a solver fails to converge or detects inconsistent input.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::size_t iterations = 0)
      : Error(what), iterations_(iterations) {}

  std::size_t iterations() const noexcept { return iterations_; }

 private:
  std::size_t iterations_;
};

/// The dense oracle refused an instance whose product support is too large.
class OracleGuardExceeded : public Error {
 public:
  OracleGuardExceeded(std::size_t variables, std::size_t guard)
      : Error("oracle size guard exceeded: " + std::to_string(variables) +
              " variables > guard " + std::to_string(guard)),
        variables_(variables),
        guard_(guard) {}

  std::size_t variables() const noexcept { return variables_; }
  std::size_t guard() const noexcept { return guard_; }

 private:
  std::size_t variables_;
  std::size_t guard_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace motbary
