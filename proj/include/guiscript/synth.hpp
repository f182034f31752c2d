#pragma once

// Script synthesis and migration: trace -> script IR -> Appium/Python text,
// a text linter for generated scripts, and the migration workflow.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "guiscript/device.hpp"
#include "guiscript/gateway.hpp"
#include "guiscript/model.hpp"

namespace guiscript {

inline constexpr int kDefaultPageWaitMs = 2000;

struct SynthOptions {
  // Wait inserted after every step whose round changed the page.
  int page_wait_ms = kDefaultPageWaitMs;
};

// One step per effective action (no_effect / element_not_found rounds are
// skipped), engine pop-up dismissals included, plus a wait after every page
// change. Throws Error(trace_not_done) unless the trace ended in DONE after at
// least one effective action.
TestScript synthesize_from_trace(const ExplorationTrace& trace, const DeviceConfig& cfg,
                                 const SynthOptions& options = {});

// Asks the model for the final script (summarization prompt) and extracts it.
// nullopt when the reply has no recognizable code.
std::optional<std::string> synthesize_via_llm(const ChatTranscript& transcript, Gateway& gateway,
                                              std::optional<std::int64_t> token_budget = std::nullopt);

// Canonical Appium/Python rendering. Element access always uses the explicit
// wait form; input steps click the field before typing.
std::string render(const TestScript& script);

struct LintFinding {
  std::string rule;
  int line = 0;  // 1-based
  std::string message;

  bool operator==(const LintFinding&) const = default;
};

void to_json(json& j, const LintFinding& v);
void from_json(const json& j, LintFinding& v);

namespace lint_rule {
inline constexpr std::string_view kDeprecatedApi = "DEPRECATED_API";
inline constexpr std::string_view kMixedLocatorStyle = "MIXED_LOCATOR_STYLE";
inline constexpr std::string_view kMissingWait = "MISSING_WAIT";
inline constexpr std::string_view kInputWithoutFocus = "INPUT_WITHOUT_FOCUS";
inline constexpr std::string_view kNoCaps = "NO_CAPS";
}  // namespace lint_rule

// Heuristic text checks; findings ordered by line.
std::vector<LintFinding> lint(std::string_view script_text);

// Names of missing information items; empty when the spec is complete.
std::vector<std::string> validate_migration_spec(const MigrationSpec& spec);

struct MigrationReport {
  std::string script_text;
  std::vector<LintFinding> findings;
  int changed_line_count = 0;
  // The model returned the old script unchanged.
  bool unchanged = false;
};

void to_json(json& j, const MigrationReport& v);

// Added plus removed lines between two texts (LCS line diff, trailing
// whitespace ignored).
int changed_line_count(std::string_view old_text, std::string_view new_text);

// Validates, prompts once, extracts, lints. Throws Error(invalid_spec) before
// any gateway call when information is missing, Error(extraction_failed) when
// the reply holds no script.
MigrationReport migrate(const MigrationSpec& spec, Gateway& gateway);

struct ReplayFailure {
  int step = 0;  // 1-based step number
  OutcomeStatus status = OutcomeStatus::element_not_found;
  std::string detail;

  bool operator==(const ReplayFailure&) const = default;
};

struct ReplayReport {
  std::string reached_fingerprint;
  std::vector<ReplayFailure> failures;
};

void to_json(json& j, const ReplayReport& v);

// Executes the steps in order and stops at the first failing step. Waits are
// no-ops on the driver.
ReplayReport replay_script(const TestScript& script, Driver& driver);

}  // namespace guiscript
