#pragma once

#include <stdexcept>
#include <string>

namespace stealthsim {

// Shared exception taxonomy. Everything derives from Error so callers can
// catch the whole family at the CLI boundary.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// An iterative solver failed to reach its tolerance (divergence or cap hit).
class NonConvergence : public Error {
 public:
  using Error::Error;
};

// Operand shapes are inconsistent with the operation's contract.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// A matrix required to be symmetric (or symmetric PSD) is not.
class NotSymmetric : public Error {
 public:
  using Error::Error;
};

// A model noise covariance violates its positive-definiteness requirement.
class NoisePDViolation : public Error {
 public:
  using Error::Error;
};

// A covariance that must be invertible is singular to working precision.
class SingularCovariance : public Error {
 public:
  using Error::Error;
};

// An empirical estimator was given fewer samples than its contract demands.
class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

// The plant seen by the attacker is not right invertible.
class NotRightInvertible : public Error {
 public:
  using Error::Error;
};

// A closed-loop matrix that must be Schur stable is not.
class UnstableClosedLoop : public Error {
 public:
  using Error::Error;
};

// A scalar root/bisection search could not bracket its target.
class NoBracket : public Error {
 public:
  using Error::Error;
};

// Too few usable points to fit a decay exponent.
class ExponentUnfittable : public Error {
 public:
  using Error::Error;
};

// Malformed input text (matrix files, config stanzas, plan files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Simulated state left the representable range (reported with step index).
class NumericOverflow : public Error {
 public:
  using Error::Error;
};

}  // namespace stealthsim
