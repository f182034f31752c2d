#pragma once

// Domain types shared by every module, with their canonical JSON encodings.
//
// All JSON field names are snake_case and match the struct members. Optional
// members are omitted from the encoding when absent.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace guiscript {

using nlohmann::json;

struct DeviceConfig {
  std::string device_name;
  std::string app_package;
  std::string app_activity;
  bool no_reset = false;
  bool full_reset = false;

  bool operator==(const DeviceConfig&) const = default;
};

// Names the first violated field, or nullopt when the config is valid.
std::optional<std::string> validate_device_config(const DeviceConfig& cfg);

struct Bounds {
  int left = 0;
  int top = 0;
  int right = 0;
  int bottom = 0;

  bool operator==(const Bounds&) const = default;
};

struct UiElement {
  std::string xpath;
  std::optional<std::string> resource_id;
  std::optional<std::string> text;
  std::optional<std::string> hint;
  std::string class_name;
  bool clickable = false;
  bool editable = false;
  std::optional<bool> checked;
  std::optional<Bounds> bounds;

  bool operator==(const UiElement&) const = default;
};

struct UiSnapshot {
  std::string page_fingerprint;
  std::vector<UiElement> elements;
  std::optional<std::string> raw_source;

  bool operator==(const UiSnapshot&) const = default;

  const UiElement* find(std::string_view xpath) const;
};

// Structural page identity: a digest over (xpath, class_name, clickable,
// editable) of every element in document order. Text, hint, checked state and
// bounds do not participate, so typing into a field is not navigation.
std::string fingerprint(const std::vector<UiElement>& elements);

// Sentinel returned by fingerprint() for a page without elements.
inline constexpr std::string_view kEmptyPageFingerprint = "empty-page";

UiSnapshot make_snapshot(std::vector<UiElement> elements,
                         std::optional<std::string> raw_source = std::nullopt);

enum class OperationType { click, input, drag };

std::string_view to_string(OperationType type);
std::optional<OperationType> parse_operation_type(std::string_view text);

// Directions accepted in operation_text of a drag.
inline constexpr std::string_view kDragDirections[] = {"up", "down", "left", "right"};

struct Action {
  std::string element_xpath;
  OperationType operation_type = OperationType::click;
  std::string operation_text;

  bool operator==(const Action&) const = default;
};

// An action as it arrives from outside (reply JSON, files) before the
// operation type has been checked.
struct ActionDraft {
  std::string element_xpath;
  std::string operation_type;
  std::string operation_text;
};

enum class ActionError { missing_xpath, empty_input_text, bad_operation_type, bad_drag_direction };

std::string_view to_string(ActionError error);

std::optional<ActionError> validate_action(const Action& action);
std::variant<Action, ActionError> validate_action(const ActionDraft& draft);

enum class LocatorStrategy { id, xpath };

std::string_view to_string(LocatorStrategy strategy);
std::optional<LocatorStrategy> parse_locator_strategy(std::string_view text);

struct Locator {
  LocatorStrategy strategy = LocatorStrategy::id;
  std::string value;

  bool operator==(const Locator&) const = default;
};

enum class StepKind { click, input, drag, wait };

std::string_view to_string(StepKind kind);

struct TestStep {
  std::optional<Locator> locator;
  StepKind kind = StepKind::click;
  std::optional<std::string> text;
  int wait_before_ms = 0;

  bool operator==(const TestStep&) const = default;
};

std::optional<std::string> validate_step(const TestStep& step);

struct TestScript {
  DeviceConfig config;
  std::vector<TestStep> steps;
  std::string scenario_name;

  bool operator==(const TestScript&) const = default;
};

// Checks the config and every step; a script must have at least one step.
std::optional<std::string> validate_script(const TestScript& script);

// Reply classification produced by the prompt engine.
struct Decision {
  enum class Variant { done, act, unparseable };

  Variant variant = Variant::unparseable;
  std::string summary;           // done
  std::optional<Action> action;  // act
  std::string reason;            // unparseable
  std::string raw;               // unparseable

  static Decision make_done(std::string summary);
  static Decision make_act(Action action);
  static Decision make_unparseable(std::string reason, std::string raw);

  bool operator==(const Decision&) const = default;
};

std::string_view to_string(Decision::Variant variant);

enum class OutcomeStatus { ok, no_effect, element_not_found, popup_appeared };

std::string_view to_string(OutcomeStatus status);

struct ActionOutcome {
  OutcomeStatus status = OutcomeStatus::ok;
  UiSnapshot new_snapshot;
  // Set when an input was preceded by an engine-issued focus click.
  bool implicit_focus = false;

  bool operator==(const ActionOutcome&) const = default;
};

enum class Initiator { llm, engine };

std::string_view to_string(Initiator initiator);

struct ExplorationRound {
  UiSnapshot snapshot;
  Decision decision;
  ActionOutcome outcome;
  Initiator initiator = Initiator::llm;

  bool operator==(const ExplorationRound&) const = default;
};

enum class Terminal { done, round_cap, budget_cap, stagnation, parse_failure };

std::string_view to_string(Terminal terminal);

struct ExplorationTrace {
  std::string scenario_name;
  std::vector<ExplorationRound> rounds;
  Terminal terminal = Terminal::round_cap;

  bool operator==(const ExplorationTrace&) const = default;

  // Fingerprint of the page the session ended on.
  std::string terminal_fingerprint() const;
  // Number of rounds in which the model (not the engine) was consulted.
  std::size_t llm_round_count() const;
};

enum class MigrationKind { cross_platform, cross_app };

std::string_view to_string(MigrationKind kind);

struct ElementIdentifier {
  int step_index = 1;  // 1-based, matches "Step-N"
  LocatorStrategy strategy = LocatorStrategy::id;
  std::string value;

  bool operator==(const ElementIdentifier&) const = default;
};

struct PlatformInfo {
  std::string new_device_name;
  std::string new_os_version_or_brand;

  bool operator==(const PlatformInfo&) const = default;
};

struct AppInfo {
  std::string package_name;
  std::string main_activity;

  bool operator==(const AppInfo&) const = default;
};

struct MigrationSpec {
  MigrationKind kind = MigrationKind::cross_platform;
  std::string old_script_text;
  std::vector<std::string> differential_steps;
  std::vector<ElementIdentifier> element_identifiers;
  std::optional<PlatformInfo> platform_info;
  std::optional<AppInfo> app_info;

  bool operator==(const MigrationSpec&) const = default;
};

enum class Role { system, user, assistant };

std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

// ceil(characters / 4) + 4 per message, characters counted as UTF-8 code
// points. An approximation, not a tokenizer.
std::int64_t estimate_message_tokens(std::string_view content);

struct ChatTranscript {
  std::vector<ChatMessage> messages;
  std::int64_t token_estimate = 0;

  bool operator==(const ChatTranscript&) const = default;

  // Appends and keeps token_estimate in sync.
  void append(Role role, std::string content);
};

// JSON encodings. from_json throws guiscript::Error(schema_error) on malformed
// input; MigrationSpec decoding is lenient about missing members so that
// validation can name them.
void to_json(json& j, const DeviceConfig& v);
void from_json(const json& j, DeviceConfig& v);
void to_json(json& j, const Bounds& v);
void from_json(const json& j, Bounds& v);
void to_json(json& j, const UiElement& v);
void from_json(const json& j, UiElement& v);
void to_json(json& j, const UiSnapshot& v);
void from_json(const json& j, UiSnapshot& v);
void to_json(json& j, const Action& v);
void from_json(const json& j, Action& v);
void to_json(json& j, const Locator& v);
void from_json(const json& j, Locator& v);
void to_json(json& j, const TestStep& v);
void from_json(const json& j, TestStep& v);
void to_json(json& j, const TestScript& v);
void from_json(const json& j, TestScript& v);
void to_json(json& j, const Decision& v);
void from_json(const json& j, Decision& v);
void to_json(json& j, const ActionOutcome& v);
void from_json(const json& j, ActionOutcome& v);
void to_json(json& j, const ExplorationRound& v);
void from_json(const json& j, ExplorationRound& v);
void to_json(json& j, const ExplorationTrace& v);
void from_json(const json& j, ExplorationTrace& v);
void to_json(json& j, const ElementIdentifier& v);
void from_json(const json& j, ElementIdentifier& v);
void to_json(json& j, const MigrationSpec& v);
void from_json(const json& j, MigrationSpec& v);
void to_json(json& j, const ChatMessage& v);
void from_json(const json& j, ChatMessage& v);
void to_json(json& j, const ChatTranscript& v);
void from_json(const json& j, ChatTranscript& v);

// Trace JSON-lines: one round per line, then a summary record.
std::string trace_to_jsonl(const ExplorationTrace& trace);
ExplorationTrace trace_from_jsonl(std::string_view text);

// SHA-256 of the input as lowercase hex.
std::string sha256_hex(std::string_view data);

}  // namespace guiscript
