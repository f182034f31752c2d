#include "guiscript/error.hpp"

#include <utility>

namespace guiscript {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::validation: return "validation-error";
    case ErrorCode::transport_error: return "transport-error";
    case ErrorCode::fixture_exhausted: return "fixture-exhausted";
    case ErrorCode::auth_missing: return "auth-missing";
    case ErrorCode::timeout: return "timeout";
    case ErrorCode::empty_steps: return "empty-steps";
    case ErrorCode::empty_arg: return "empty-arg";
    case ErrorCode::wrong_kind: return "wrong-kind";
    case ErrorCode::invalid_spec: return "invalid-spec";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::io_error: return "io-error";
    case ErrorCode::schema_error: return "schema-error";
    case ErrorCode::invariant_violation: return "invariant-violation";
    case ErrorCode::session_lost: return "session-lost";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::unsupported_action: return "unsupported-action";
    case ErrorCode::budget_too_small: return "budget-too-small";
    case ErrorCode::trace_not_done: return "trace-not-done";
    case ErrorCode::extraction_failed: return "extraction-failed";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::vector<std::string> details)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code),
      details_(std::move(details)) {}

}  // namespace guiscript
