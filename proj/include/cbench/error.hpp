#pragma once

#include <stdexcept>
#include <string>

namespace cbench {

// Input or contract violations. The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failures while doing otherwise valid work (I/O, decode, numerics). Exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cbench
