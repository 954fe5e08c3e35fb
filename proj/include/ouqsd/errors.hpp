#pragma once

#include <stdexcept>
#include <string>

namespace ouqsd {

/// Invalid run configuration (bad field value, unknown config key, ...).
/// Maps to CLI exit code 2.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// An integrator failed to meet its tolerance at the maximum refinement
/// depth. Carries the best available estimate and its error bound.
class accuracy_error : public std::runtime_error {
 public:
  accuracy_error(const std::string& what, double estimate, double error_bound)
      : std::runtime_error(what), estimate_(estimate), error_bound_(error_bound) {}

  double estimate() const { return estimate_; }
  double error_bound() const { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

}  // namespace ouqsd
