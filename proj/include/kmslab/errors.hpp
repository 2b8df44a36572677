#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kmslab {

enum class ErrorCode {
  invalid_argument,
  invalid_cylinder,
  invalid_beta,
  additivity_violation,
  divergent_orbit_weights,
  not_conformal,
  window_too_small,
  not_coprime,
  invalid_frequencies,
  invalid_level,
  rational_alpha,
  precision_exhausted,
  slope_violation,
  partition_invalid,
  not_decreasing,
  coherence_violation,
  negative_weight,
  key_exists,
  config_invalid,
  check_failed,
};

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::invalid_cylinder: return "InvalidCylinder";
    case ErrorCode::invalid_beta: return "InvalidBeta";
    case ErrorCode::additivity_violation: return "AdditivityViolation";
    case ErrorCode::divergent_orbit_weights: return "DivergentOrbitWeights";
    case ErrorCode::not_conformal: return "NotConformal";
    case ErrorCode::window_too_small: return "WindowTooSmall";
    case ErrorCode::not_coprime: return "NotCoprime";
    case ErrorCode::invalid_frequencies: return "InvalidFrequencies";
    case ErrorCode::invalid_level: return "InvalidLevel";
    case ErrorCode::rational_alpha: return "RationalAlpha";
    case ErrorCode::precision_exhausted: return "PrecisionExhausted";
    case ErrorCode::slope_violation: return "SlopeViolation";
    case ErrorCode::partition_invalid: return "PartitionInvalid";
    case ErrorCode::not_decreasing: return "NotDecreasing";
    case ErrorCode::coherence_violation: return "CoherenceViolation";
    case ErrorCode::negative_weight: return "NegativeWeight";
    case ErrorCode::key_exists: return "KeyExists";
    case ErrorCode::config_invalid: return "ConfigInvalid";
    case ErrorCode::check_failed: return "CheckFailed";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace kmslab
