#pragma once

#include <stdexcept>
#include <string>

namespace rmtldp {

/// Precondition or input-domain violation (exit code 2 at the CLI).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Entry law cannot be built with the requested calibration.
class CalibrationError : public InvalidInput {
 public:
  CalibrationError(const std::string& what, double min_feasible_t0)
      : InvalidInput(what), min_feasible_t0_(min_feasible_t0) {}
  double min_feasible_t0() const { return min_feasible_t0_; }

 private:
  double min_feasible_t0_;
};

/// A computed result broke a proven bound (exit code 3 at the CLI).
class CertificateViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Request outside the supported model class.
class Unsupported : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

}  // namespace rmtldp
