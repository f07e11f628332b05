#pragma once

#include <stdexcept>
#include <string>

namespace sarqc {

// Bad shapes, out-of-range parameters, empty inputs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Factorizations or solves that fail even after jitter.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller-supplied data violates a documented precondition
// (e.g. a "chosen" candidate that is not a constrained minimizer).
class PreconditionViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// File system and format errors.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sarqc
