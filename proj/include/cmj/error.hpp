#pragma once

#include <stdexcept>
#include <string>

namespace cmj {

// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  ok = 0,
  usage = 1,
  assumption_violation = 2,
  unsupported_regime = 3,
  resource_cap = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::usage; }
};

/// Invalid parameters or malformed input (bad law parameters, bad config).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A modelling assumption does not hold. `assumption()` names it ("A1", "A3", ...).
class AssumptionViolation : public Error {
 public:
  AssumptionViolation(std::string assumption, const std::string& what)
      : Error(assumption + " violated: " + what), assumption_(std::move(assumption)) {}
  const std::string& assumption() const noexcept { return assumption_; }
  ExitCode exit_code() const noexcept override { return ExitCode::assumption_violation; }

 private:
  std::string assumption_;
};

/// The requested computation lies outside the supported regime (boundary roots,
/// degenerate variance, ...).
class UnsupportedRegime : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::unsupported_regime; }
};

/// Node cap or Monte Carlo budget exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::resource_cap; }
};

/// Argument outside the domain of a function (Laplace transform, g, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A quantity cannot be decided from what has been simulated.
class UndecidableError : public Error {
 public:
  using Error::Error;
};

/// The operation needs a capability the inputs do not provide (missing analytic
/// mean, nested Monte Carlo disabled, ...).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Numerical procedure failed to produce a trustworthy answer.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmj
