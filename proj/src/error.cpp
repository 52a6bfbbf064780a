#include "mcsc/error.hpp"

namespace mcsc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::singular_system: return "singular_system";
    case ErrorCode::no_convergence: return "no_convergence";
    case ErrorCode::infeasible_marginals: return "infeasible_marginals";
    case ErrorCode::log_divergence: return "log_divergence";
    case ErrorCode::already_reset: return "already_reset";
    case ErrorCode::duplicate_record: return "duplicate_record";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::schema_error: return "schema_error";
  }
  return "unknown";
}

}  // namespace mcsc
