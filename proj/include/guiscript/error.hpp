#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace guiscript {

enum class ErrorCode {
  // core-model
  validation,
  // llm-gateway
  transport_error,
  fixture_exhausted,
  auth_missing,
  timeout,
  // prompt-engine
  empty_steps,
  empty_arg,
  wrong_kind,
  invalid_spec,
  precondition,
  // device-backend
  io_error,
  schema_error,
  invariant_violation,
  session_lost,
  parse_error,
  unsupported_action,
  // explorer
  budget_too_small,
  // script-synth
  trace_not_done,
  extraction_failed,
};

// Kebab-case name used in messages and reports, e.g. "fixture-exhausted".
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::vector<std::string> details = {});

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

}  // namespace guiscript
