#include "guiscript/model.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include <openssl/evp.h>

#include "guiscript/error.hpp"

namespace guiscript {

namespace {

[[noreturn]] void schema_fail(const std::string& what) {
  throw Error(ErrorCode::schema_error, what);
}

template <typename T>
T required(const json& j, const char* key) {
  if (!j.is_object()) schema_fail(std::string("expected object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) schema_fail(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    schema_fail(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T optional_or(const json& j, const char* key, T fallback) {
  if (!j.is_object()) return fallback;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    schema_fail(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  if (!j.is_object()) return std::nullopt;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    schema_fail(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& value) {
  if (value) j[key] = *value;
}

template <typename Enum, std::size_t N>
Enum enum_from(const json& j, const char* key, const std::array<Enum, N>& values) {
  const auto text = required<std::string>(j, key);
  for (Enum v : values) {
    if (to_string(v) == text) return v;
  }
  schema_fail(std::string("field '") + key + "': unknown value '" + text + "'");
}

constexpr std::array kOperationTypes{OperationType::click, OperationType::input, OperationType::drag};
constexpr std::array kStepKinds{StepKind::click, StepKind::input, StepKind::drag, StepKind::wait};
constexpr std::array kStrategies{LocatorStrategy::id, LocatorStrategy::xpath};
constexpr std::array kStatuses{OutcomeStatus::ok, OutcomeStatus::no_effect,
                               OutcomeStatus::element_not_found, OutcomeStatus::popup_appeared};
constexpr std::array kTerminals{Terminal::done, Terminal::round_cap, Terminal::budget_cap,
                                Terminal::stagnation, Terminal::parse_failure};
constexpr std::array kMigrationKinds{MigrationKind::cross_platform, MigrationKind::cross_app};
constexpr std::array kRoles{Role::system, Role::user, Role::assistant};

constexpr std::array kInitiators{Initiator::llm, Initiator::engine};
constexpr std::array kVariants{Decision::Variant::done, Decision::Variant::act,
                               Decision::Variant::unparseable};

}  // namespace

std::string_view to_string(Initiator initiator) {
  return initiator == Initiator::llm ? "llm" : "engine";
}

std::string_view to_string(Decision::Variant variant) {
  switch (variant) {
    case Decision::Variant::done: return "done";
    case Decision::Variant::act: return "act";
    case Decision::Variant::unparseable: return "unparseable";
  }
  return "unparseable";
}

std::optional<std::string> validate_device_config(const DeviceConfig& cfg) {
  if (cfg.device_name.empty()) return "device_name";
  if (cfg.app_package.empty()) return "app_package";
  if (cfg.app_activity.empty()) return "app_activity";
  if (cfg.no_reset && cfg.full_reset) return "no_reset/full_reset";
  return std::nullopt;
}

const UiElement* UiSnapshot::find(std::string_view xpath) const {
  auto it = std::find_if(elements.begin(), elements.end(),
                         [&](const UiElement& e) { return e.xpath == xpath; });
  return it == elements.end() ? nullptr : &*it;
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0f]);
  }
  return out;
}

std::string fingerprint(const std::vector<UiElement>& elements) {
  if (elements.empty()) return std::string(kEmptyPageFingerprint);
  // Unit/record separators keep field boundaries unambiguous.
  std::string canonical;
  for (const auto& e : elements) {
    canonical += e.xpath;
    canonical += '\x1f';
    canonical += e.class_name;
    canonical += '\x1f';
    canonical += e.clickable ? '1' : '0';
    canonical += e.editable ? '1' : '0';
    canonical += '\x1e';
  }
  return sha256_hex(canonical);
}

UiSnapshot make_snapshot(std::vector<UiElement> elements, std::optional<std::string> raw_source) {
  UiSnapshot s;
  s.page_fingerprint = fingerprint(elements);
  s.elements = std::move(elements);
  s.raw_source = std::move(raw_source);
  return s;
}

std::string_view to_string(OperationType type) {
  switch (type) {
    case OperationType::click: return "click";
    case OperationType::input: return "input";
    case OperationType::drag: return "drag";
  }
  return "click";
}

std::optional<OperationType> parse_operation_type(std::string_view text) {
  for (auto t : kOperationTypes) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

std::string_view to_string(ActionError error) {
  switch (error) {
    case ActionError::missing_xpath: return "missing-xpath";
    case ActionError::empty_input_text: return "empty-input-text";
    case ActionError::bad_operation_type: return "bad-operation-type";
    case ActionError::bad_drag_direction: return "bad-drag-direction";
  }
  return "bad-operation-type";
}

std::optional<ActionError> validate_action(const Action& action) {
  switch (action.operation_type) {
    case OperationType::click:
      if (action.element_xpath.empty()) return ActionError::missing_xpath;
      return std::nullopt;
    case OperationType::input:
      if (action.element_xpath.empty()) return ActionError::missing_xpath;
      if (action.operation_text.empty()) return ActionError::empty_input_text;
      return std::nullopt;
    case OperationType::drag: {
      const auto& dirs = kDragDirections;
      if (std::find(std::begin(dirs), std::end(dirs), action.operation_text) == std::end(dirs)) {
        return ActionError::bad_drag_direction;
      }
      return std::nullopt;
    }
  }
  return ActionError::bad_operation_type;
}

std::variant<Action, ActionError> validate_action(const ActionDraft& draft) {
  auto type = parse_operation_type(draft.operation_type);
  if (!type) return ActionError::bad_operation_type;
  Action action{draft.element_xpath, *type, draft.operation_text};
  if (auto err = validate_action(action)) return *err;
  return action;
}

std::string_view to_string(LocatorStrategy strategy) {
  return strategy == LocatorStrategy::id ? "id" : "xpath";
}

std::optional<LocatorStrategy> parse_locator_strategy(std::string_view text) {
  if (text == "id") return LocatorStrategy::id;
  if (text == "xpath") return LocatorStrategy::xpath;
  return std::nullopt;
}

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::click: return "click";
    case StepKind::input: return "input";
    case StepKind::drag: return "drag";
    case StepKind::wait: return "wait";
  }
  return "click";
}

std::optional<std::string> validate_step(const TestStep& step) {
  if (step.wait_before_ms < 0) return "wait_before_ms";
  if (step.locator && step.locator->value.empty()) return "locator.value";
  switch (step.kind) {
    case StepKind::click:
      if (!step.locator) return "locator";
      break;
    case StepKind::input:
      if (!step.locator) return "locator";
      if (!step.text || step.text->empty()) return "text";
      break;
    case StepKind::drag: {
      const auto& dirs = kDragDirections;
      if (!step.text || std::find(std::begin(dirs), std::end(dirs), *step.text) == std::end(dirs)) {
        return "text";
      }
      break;
    }
    case StepKind::wait:
      if (step.locator) return "locator";
      if (step.wait_before_ms <= 0) return "wait_before_ms";
      break;
  }
  return std::nullopt;
}

std::optional<std::string> validate_script(const TestScript& script) {
  if (auto bad = validate_device_config(script.config)) return "config." + *bad;
  if (script.steps.empty()) return "steps";
  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    if (auto bad = validate_step(script.steps[i])) {
      return "steps[" + std::to_string(i) + "]." + *bad;
    }
  }
  return std::nullopt;
}

Decision Decision::make_done(std::string summary) {
  Decision d;
  d.variant = Variant::done;
  d.summary = std::move(summary);
  return d;
}

Decision Decision::make_act(Action action) {
  Decision d;
  d.variant = Variant::act;
  d.action = std::move(action);
  return d;
}

Decision Decision::make_unparseable(std::string reason, std::string raw) {
  Decision d;
  d.variant = Variant::unparseable;
  d.reason = std::move(reason);
  d.raw = std::move(raw);
  return d;
}

std::string_view to_string(OutcomeStatus status) {
  switch (status) {
    case OutcomeStatus::ok: return "ok";
    case OutcomeStatus::no_effect: return "no_effect";
    case OutcomeStatus::element_not_found: return "element_not_found";
    case OutcomeStatus::popup_appeared: return "popup_appeared";
  }
  return "ok";
}

std::string_view to_string(Terminal terminal) {
  switch (terminal) {
    case Terminal::done: return "done";
    case Terminal::round_cap: return "round_cap";
    case Terminal::budget_cap: return "budget_cap";
    case Terminal::stagnation: return "stagnation";
    case Terminal::parse_failure: return "parse_failure";
  }
  return "round_cap";
}

std::string ExplorationTrace::terminal_fingerprint() const {
  if (rounds.empty()) return {};
  return rounds.back().outcome.new_snapshot.page_fingerprint;
}

std::size_t ExplorationTrace::llm_round_count() const {
  return static_cast<std::size_t>(std::count_if(
      rounds.begin(), rounds.end(), [](const auto& r) { return r.initiator == Initiator::llm; }));
}

std::string_view to_string(MigrationKind kind) {
  return kind == MigrationKind::cross_platform ? "cross_platform" : "cross_app";
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::int64_t estimate_message_tokens(std::string_view content) {
  std::int64_t chars = 0;
  for (unsigned char c : content) {
    if ((c & 0xC0) != 0x80) ++chars;
  }
  return (chars + 3) / 4 + 4;
}

void ChatTranscript::append(Role role, std::string content) {
  token_estimate += estimate_message_tokens(content);
  messages.push_back({role, std::move(content)});
}

// ---- JSON ------------------------------------------------------------------

void to_json(json& j, const DeviceConfig& v) {
  j = json{{"device_name", v.device_name},
           {"app_package", v.app_package},
           {"app_activity", v.app_activity},
           {"no_reset", v.no_reset},
           {"full_reset", v.full_reset}};
}

void from_json(const json& j, DeviceConfig& v) {
  v.device_name = required<std::string>(j, "device_name");
  v.app_package = required<std::string>(j, "app_package");
  v.app_activity = required<std::string>(j, "app_activity");
  v.no_reset = optional_or<bool>(j, "no_reset", false);
  v.full_reset = optional_or<bool>(j, "full_reset", false);
}

void to_json(json& j, const Bounds& v) {
  j = json{{"left", v.left}, {"top", v.top}, {"right", v.right}, {"bottom", v.bottom}};
}

void from_json(const json& j, Bounds& v) {
  v.left = required<int>(j, "left");
  v.top = required<int>(j, "top");
  v.right = required<int>(j, "right");
  v.bottom = required<int>(j, "bottom");
}

void to_json(json& j, const UiElement& v) {
  j = json{{"xpath", v.xpath},
           {"class_name", v.class_name},
           {"clickable", v.clickable},
           {"editable", v.editable}};
  put_optional(j, "resource_id", v.resource_id);
  put_optional(j, "text", v.text);
  put_optional(j, "hint", v.hint);
  put_optional(j, "checked", v.checked);
  put_optional(j, "bounds", v.bounds);
}

void from_json(const json& j, UiElement& v) {
  v.xpath = required<std::string>(j, "xpath");
  if (v.xpath.empty()) schema_fail("element xpath is empty");
  v.class_name = optional_or<std::string>(j, "class_name", "");
  v.clickable = optional_or<bool>(j, "clickable", false);
  v.editable = optional_or<bool>(j, "editable", false);
  v.resource_id = optional_field<std::string>(j, "resource_id");
  v.text = optional_field<std::string>(j, "text");
  v.hint = optional_field<std::string>(j, "hint");
  v.checked = optional_field<bool>(j, "checked");
  v.bounds = optional_field<Bounds>(j, "bounds");
}

void to_json(json& j, const UiSnapshot& v) {
  j = json{{"page_fingerprint", v.page_fingerprint}, {"elements", v.elements}};
  put_optional(j, "raw_source", v.raw_source);
}

void from_json(const json& j, UiSnapshot& v) {
  v.elements = required<std::vector<UiElement>>(j, "elements");
  v.page_fingerprint = optional_or<std::string>(j, "page_fingerprint", fingerprint(v.elements));
  v.raw_source = optional_field<std::string>(j, "raw_source");
}

void to_json(json& j, const Action& v) {
  j = json{{"element_xpath", v.element_xpath},
           {"operation_type", to_string(v.operation_type)},
           {"operation_text", v.operation_text}};
}

void from_json(const json& j, Action& v) {
  v.element_xpath = optional_or<std::string>(j, "element_xpath", "");
  v.operation_type = enum_from(j, "operation_type", kOperationTypes);
  v.operation_text = optional_or<std::string>(j, "operation_text", "");
}

void to_json(json& j, const Locator& v) {
  j = json{{"strategy", to_string(v.strategy)}, {"value", v.value}};
}

void from_json(const json& j, Locator& v) {
  v.strategy = enum_from(j, "strategy", kStrategies);
  v.value = required<std::string>(j, "value");
}

void to_json(json& j, const TestStep& v) {
  j = json{{"kind", to_string(v.kind)}, {"wait_before_ms", v.wait_before_ms}};
  j["locator"] = v.locator ? json(*v.locator) : json(nullptr);
  put_optional(j, "text", v.text);
}

void from_json(const json& j, TestStep& v) {
  v.kind = enum_from(j, "kind", kStepKinds);
  v.locator = optional_field<Locator>(j, "locator");
  v.text = optional_field<std::string>(j, "text");
  v.wait_before_ms = optional_or<int>(j, "wait_before_ms", 0);
}

void to_json(json& j, const TestScript& v) {
  j = json{{"config", v.config}, {"steps", v.steps}, {"scenario_name", v.scenario_name}};
}

void from_json(const json& j, TestScript& v) {
  v.config = required<DeviceConfig>(j, "config");
  v.steps = required<std::vector<TestStep>>(j, "steps");
  v.scenario_name = optional_or<std::string>(j, "scenario_name", "");
}

void to_json(json& j, const Decision& v) {
  j = json{{"variant", to_string(v.variant)}};
  switch (v.variant) {
    case Decision::Variant::done:
      j["summary"] = v.summary;
      break;
    case Decision::Variant::act:
      j["action"] = v.action ? json(*v.action) : json(nullptr);
      break;
    case Decision::Variant::unparseable:
      j["reason"] = v.reason;
      j["raw"] = v.raw;
      break;
  }
}

void from_json(const json& j, Decision& v) {
  v = Decision{};
  v.variant = enum_from(j, "variant", kVariants);
  switch (v.variant) {
    case Decision::Variant::done:
      v.summary = optional_or<std::string>(j, "summary", "");
      break;
    case Decision::Variant::act:
      v.action = required<Action>(j, "action");
      break;
    case Decision::Variant::unparseable:
      v.reason = optional_or<std::string>(j, "reason", "");
      v.raw = optional_or<std::string>(j, "raw", "");
      break;
  }
}

void to_json(json& j, const ActionOutcome& v) {
  j = json{{"status", to_string(v.status)}, {"new_snapshot", v.new_snapshot}};
  if (v.implicit_focus) j["implicit_focus"] = true;
}

void from_json(const json& j, ActionOutcome& v) {
  v.status = enum_from(j, "status", kStatuses);
  v.new_snapshot = required<UiSnapshot>(j, "new_snapshot");
  v.implicit_focus = optional_or<bool>(j, "implicit_focus", false);
}

void to_json(json& j, const ExplorationRound& v) {
  j = json{{"snapshot", v.snapshot},
           {"decision", v.decision},
           {"outcome", v.outcome},
           {"initiator", to_string(v.initiator)}};
}

void from_json(const json& j, ExplorationRound& v) {
  v.snapshot = required<UiSnapshot>(j, "snapshot");
  v.decision = required<Decision>(j, "decision");
  v.outcome = required<ActionOutcome>(j, "outcome");
  v.initiator = j.contains("initiator") ? enum_from(j, "initiator", kInitiators) : Initiator::llm;
}

void to_json(json& j, const ExplorationTrace& v) {
  j = json{{"scenario_name", v.scenario_name},
           {"rounds", v.rounds},
           {"terminal", to_string(v.terminal)}};
}

void from_json(const json& j, ExplorationTrace& v) {
  v.scenario_name = optional_or<std::string>(j, "scenario_name", "");
  v.rounds = required<std::vector<ExplorationRound>>(j, "rounds");
  v.terminal = enum_from(j, "terminal", kTerminals);
  if (v.terminal == Terminal::done &&
      (v.rounds.empty() || v.rounds.back().decision.variant != Decision::Variant::done)) {
    schema_fail("terminal 'done' requires the last decision to be done");
  }
}

void to_json(json& j, const ElementIdentifier& v) {
  j = json{{"step_index", v.step_index}, {"strategy", to_string(v.strategy)}, {"value", v.value}};
}

void from_json(const json& j, ElementIdentifier& v) {
  v.step_index = required<int>(j, "step_index");
  v.strategy = enum_from(j, "strategy", kStrategies);
  v.value = optional_or<std::string>(j, "value", "");
}

void to_json(json& j, const MigrationSpec& v) {
  j = json{{"kind", to_string(v.kind)},
           {"old_script_text", v.old_script_text},
           {"differential_steps", v.differential_steps},
           {"element_identifiers", v.element_identifiers}};
  if (v.platform_info) {
    j["platform_info"] = json{{"new_device_name", v.platform_info->new_device_name},
                              {"new_os_version_or_brand", v.platform_info->new_os_version_or_brand}};
  }
  if (v.app_info) {
    j["app_info"] = json{{"package_name", v.app_info->package_name},
                         {"main_activity", v.app_info->main_activity}};
  }
}

void from_json(const json& j, MigrationSpec& v) {
  v = MigrationSpec{};
  v.kind = enum_from(j, "kind", kMigrationKinds);
  v.old_script_text = optional_or<std::string>(j, "old_script_text", "");
  v.differential_steps = optional_or<std::vector<std::string>>(j, "differential_steps", {});
  v.element_identifiers =
      optional_or<std::vector<ElementIdentifier>>(j, "element_identifiers", {});
  if (j.contains("platform_info") && !j["platform_info"].is_null()) {
    const auto& p = j["platform_info"];
    v.platform_info = PlatformInfo{optional_or<std::string>(p, "new_device_name", ""),
                                   optional_or<std::string>(p, "new_os_version_or_brand", "")};
  }
  if (j.contains("app_info") && !j["app_info"].is_null()) {
    const auto& a = j["app_info"];
    v.app_info = AppInfo{optional_or<std::string>(a, "package_name", ""),
                         optional_or<std::string>(a, "main_activity", "")};
  }
}

void to_json(json& j, const ChatMessage& v) {
  j = json{{"role", to_string(v.role)}, {"content", v.content}};
}

void from_json(const json& j, ChatMessage& v) {
  v.role = enum_from(j, "role", kRoles);
  v.content = required<std::string>(j, "content");
}

void to_json(json& j, const ChatTranscript& v) {
  j = json{{"messages", v.messages}, {"token_estimate", v.token_estimate}};
}

void from_json(const json& j, ChatTranscript& v) {
  v = ChatTranscript{};
  for (auto& m : required<std::vector<ChatMessage>>(j, "messages")) {
    v.append(m.role, std::move(m.content));
  }
  if (j.contains("token_estimate") && j["token_estimate"].get<std::int64_t>() != v.token_estimate) {
    schema_fail("token_estimate does not match message contents");
  }
}

std::string trace_to_jsonl(const ExplorationTrace& trace) {
  std::ostringstream out;
  for (std::size_t i = 0; i < trace.rounds.size(); ++i) {
    json line = trace.rounds[i];
    line["record"] = "round";
    line["index"] = i + 1;
    out << line.dump() << '\n';
  }
  json summary{{"record", "summary"},
               {"scenario_name", trace.scenario_name},
               {"terminal", to_string(trace.terminal)},
               {"rounds", trace.rounds.size()},
               {"llm_rounds", trace.llm_round_count()},
               {"terminal_fingerprint", trace.terminal_fingerprint()}};
  out << summary.dump() << '\n';
  return out.str();
}

ExplorationTrace trace_from_jsonl(std::string_view text) {
  ExplorationTrace trace;
  bool saw_summary = false;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      schema_fail(std::string("trace line: ") + e.what());
    }
    const auto record = optional_or<std::string>(j, "record", "round");
    if (record == "summary") {
      trace.scenario_name = optional_or<std::string>(j, "scenario_name", "");
      trace.terminal = enum_from(j, "terminal", kTerminals);
      saw_summary = true;
    } else {
      trace.rounds.push_back(j.get<ExplorationRound>());
    }
  }
  if (!saw_summary) schema_fail("trace has no summary record");
  return trace;
}

}  // namespace guiscript
