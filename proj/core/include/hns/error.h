#pragma once

#include <stdexcept>
#include <string>

namespace hns {

// Base for every error raised by the library. Callers that only care about
// "something in hns failed" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-range scenario input. Carries an optional line number
// from the source document (0 when unknown).
class ScenarioError : public Error {
 public:
  explicit ScenarioError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Requested busload cannot be reached (periodic traffic alone exceeds it).
class BusloadError : public ScenarioError {
 public:
  using ScenarioError::ScenarioError;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

// Task set cannot be scheduled (utilization above one or a missed deadline).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Obfuscation plan rejected by the scheduler (would miss a deadline) or
// inconsistent with the statistics it is applied to.
class PlanError : public Error {
 public:
  using Error::Error;
};

// Closed loop is not gamma-stable even without skips.
class UnstableBaselineError : public Error {
 public:
  using Error::Error;
};

// Victim message never observed in the analyzed trace.
class NoVictimError : public Error {
 public:
  using Error::Error;
};

// Trace and plan describe different reconnaissance periods.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

}  // namespace hns
