#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mcsc {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  insufficient_data,
  non_finite,
  singular_system,
  no_convergence,
  infeasible_marginals,
  log_divergence,
  already_reset,
  duplicate_record,
  parse_error,
  io_error,
  schema_error,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type; code() is stable and
// machine-readable, what() is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mcsc
