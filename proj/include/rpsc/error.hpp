#pragma once

#include <stdexcept>
#include <string>

namespace rpsc {

// Bad input: malformed files, violated preconditions, unusable panels.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The numerics failed: divergence, singular systems, non-finite iterates.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rpsc
