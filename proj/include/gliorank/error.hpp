#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gliorank {

enum class errc {
  invalid_argument,
  invalid_dims,
  bad_magic,
  malformed_header,
  dtype_mismatch,
  truncated_payload,
  nan_in_payload,
  io_failure,
  input_not_found,
  invalid_config,
  grid_mismatch,
  invalid_tissue,
  seed_outside_brain,
  unstable_time_step,
  instability,
  empty_sources,
  zero_speed,
  nan_objective,
  no_start_found,
  empty_region,
  zero_variance,
  undefined_correlation,
  degenerate_phantom,
};

inline std::string_view to_string(errc code) {
  switch (code) {
    case errc::invalid_argument: return "invalid_argument";
    case errc::invalid_dims: return "invalid_dims";
    case errc::bad_magic: return "bad_magic";
    case errc::malformed_header: return "malformed_header";
    case errc::dtype_mismatch: return "dtype_mismatch";
    case errc::truncated_payload: return "truncated_payload";
    case errc::nan_in_payload: return "nan_in_payload";
    case errc::io_failure: return "io_failure";
    case errc::input_not_found: return "input_not_found";
    case errc::invalid_config: return "invalid_config";
    case errc::grid_mismatch: return "grid_mismatch";
    case errc::invalid_tissue: return "invalid_tissue";
    case errc::seed_outside_brain: return "seed_outside_brain";
    case errc::unstable_time_step: return "unstable_time_step";
    case errc::instability: return "instability";
    case errc::empty_sources: return "empty_sources";
    case errc::zero_speed: return "zero_speed";
    case errc::nan_objective: return "nan_objective";
    case errc::no_start_found: return "no_start_found";
    case errc::empty_region: return "empty_region";
    case errc::zero_variance: return "zero_variance";
    case errc::undefined_correlation: return "undefined_correlation";
    case errc::degenerate_phantom: return "degenerate_phantom";
  }
  return "unknown";
}

// Input/usage problems map to exit code 2, everything else is a computational failure.
inline bool is_input_error(errc code) {
  switch (code) {
    case errc::invalid_argument:
    case errc::invalid_dims:
    case errc::bad_magic:
    case errc::malformed_header:
    case errc::dtype_mismatch:
    case errc::truncated_payload:
    case errc::nan_in_payload:
    case errc::input_not_found:
    case errc::invalid_config:
    case errc::grid_mismatch:
    case errc::invalid_tissue:
    case errc::seed_outside_brain:
    case errc::unstable_time_step:
      return true;
    default:
      return false;
  }
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& message) : std::runtime_error(message), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

/// Raised by the optimizer when the objective returns NaN; carries the offending point.
class nan_objective_error : public error {
 public:
  explicit nan_objective_error(std::vector<double> point)
      : error(errc::nan_objective, "objective returned NaN"), point_(std::move(point)) {}

  const std::vector<double>& point() const noexcept { return point_; }

 private:
  std::vector<double> point_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) { throw error(code, message); }

inline void require(bool condition, errc code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace gliorank
