#pragma once

#include <stdexcept>
#include <string>

namespace syncstab {

/// Input that violates a documented precondition or schema rule.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Phasor arithmetic across different reference frames.
class FrameMismatch : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Non-finite state, singular algebraic loop, or similar numerical breakdown.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace syncstab
