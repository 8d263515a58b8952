#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace owe {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario or inconsistent inputs (CLI exit code 2).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Gain setting violates the spectral-radius constraint (CLI exit code 3).
class InstabilityError : public Error {
 public:
  using Error::Error;
};

/// Power iteration did not settle.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, int iterations)
      : Error(what), iterations_(iterations) {}
  int iterations() const noexcept { return iterations_; }

 private:
  int iterations_;
};

/// Some EAs cannot be reached from the AP over significant channels.
class DisconnectedError : public Error {
 public:
  DisconnectedError(const std::string& what, std::vector<int> unreachable)
      : Error(what), unreachable_(std::move(unreachable)) {}
  const std::vector<int>& unreachable() const noexcept { return unreachable_; }

 private:
  std::vector<int> unreachable_;
};

}  // namespace owe
