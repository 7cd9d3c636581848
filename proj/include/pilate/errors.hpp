#pragma once

#include <stdexcept>
#include <string>

namespace pilate {

// Bad input or configuration; the CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure during a computation; exit code 1.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularityError : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

class WeakIdentificationError : public ComputationError {
 public:
  using ComputationError::ComputationError;
};

[[noreturn]] void fail_validation(const std::string& msg);

}  // namespace pilate
