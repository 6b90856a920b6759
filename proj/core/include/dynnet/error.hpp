#pragma once

#include <stdexcept>
#include <string>

namespace dynnet {

/// Invalid input or configuration (bad sizes, unknown names, broken preconditions).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced non-finite values or diverged.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The error estimator left its admissible range at `time()`.
class EstimatorDivergence : public NumericalError {
public:
  EstimatorDivergence(const std::string& what, double time) : NumericalError(what), time_(time) {}
  double time() const { return time_; }

private:
  double time_;
};

}  // namespace dynnet
