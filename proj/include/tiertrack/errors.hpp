#pragma once

#include <stdexcept>
#include <string>

namespace tiertrack {

// Open queueing model is undefined at u >= 1. Carries the first offending
// tier index (0-based).
class SaturationError : public std::runtime_error {
 public:
  SaturationError(int tier, double utilization)
      : std::runtime_error("saturation: tier " + std::to_string(tier) +
                           " utilization " + std::to_string(utilization) +
                           " >= 1"),
        tier_(tier),
        utilization_(utilization) {}

  int tier() const { return tier_; }
  double utilization() const { return utilization_; }

 private:
  int tier_;
  double utilization_;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Innovation covariance not invertible to working precision.
class SingularInnovationError : public std::runtime_error {
 public:
  explicit SingularInnovationError(const std::string& msg)
      : std::runtime_error(msg) {}
};

// A scaling directive would push a replica count outside its bounds.
class BoundsError : public std::runtime_error {
 public:
  BoundsError(int tier, const std::string& msg)
      : std::runtime_error(msg), tier_(tier) {}

  int tier() const { return tier_; }

 private:
  int tier_;
};

}  // namespace tiertrack
