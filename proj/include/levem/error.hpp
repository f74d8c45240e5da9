#pragma once

#include <stdexcept>
#include <string>

namespace levem {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A physical parameter is outside its admissible range.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class StabilityError : public Error {
 public:
  using Error::Error;
};

/// The Paul trap does not confine the particle (outside the first
/// Mathieu stability region, or uncharged).
class UnstableTrap : public StabilityError {
 public:
  using StabilityError::StabilityError;
};

/// Time step violates the integrator stability guard.
class StepTooLarge : public StabilityError {
 public:
  using StabilityError::StabilityError;
};

/// Configuration files, overrides and simulation plans.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The integrator produced a non-finite state.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DivergentTemperature : public Error {
 public:
  using Error::Error;
};

/// Feedback noise temperature is not below the circuit temperature.
class NoCoolingBenefit : public Error {
 public:
  using Error::Error;
};

class BelowDetectionLimit : public Error {
 public:
  using Error::Error;
};

class NoSteadyState : public Error {
 public:
  using Error::Error;
};

class UnsupportedPotential : public Error {
 public:
  using Error::Error;
};

/// Input series too short for the requested analysis.
class LengthError : public Error {
 public:
  using Error::Error;
};

}  // namespace levem
