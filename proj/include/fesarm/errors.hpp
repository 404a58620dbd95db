#pragma once

#include <stdexcept>
#include <string>

namespace fesarm {

// Rejected argument: non-finite numbers, out-of-domain values, bad dimensions.
class InvalidInput : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or physically inconsistent model definition.
class ModelConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Physics produced a non-finite state.
class SimulationDiverged : public std::runtime_error {
public:
  SimulationDiverged(const std::string& what, int substep)
      : std::runtime_error(what + " (substep " + std::to_string(substep) + ")"), substep_(substep) {}
  int substep() const noexcept { return substep_; }

private:
  int substep_;
};

// Linear algebra or optimisation failure (singular mass matrix, non-finite loss, ...).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Unreadable, truncated or incompatible checkpoint file.
class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace fesarm
