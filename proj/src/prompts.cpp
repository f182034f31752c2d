#include "guiscript/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "guiscript/error.hpp"
#include "guiscript/synth.hpp"

namespace guiscript {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  if (from.empty()) return text;
  for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
  return text;
}

std::string locator_annotation(LocatorStrategy strategy, std::string_view value) {
  std::string out = strategy == LocatorStrategy::id ? " (ID: \"" : " (XPath: \"";
  out += value;
  out += "\")";
  return out;
}

std::string lower_first(std::string s) {
  if (s.size() >= 2 && std::isupper(static_cast<unsigned char>(s[0])) &&
      !std::isupper(static_cast<unsigned char>(s[1]))) {
    s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  }
  return s;
}

std::string step_sentence(const ScenarioStepSpec& step) {
  std::string body(trim(step.narration));
  if (step.input_text) {
    if (body.find("{input}") != std::string::npos) {
      body = replace_all(body, "{input}", *step.input_text);
    } else {
      while (!body.empty() && body.back() == '.') body.pop_back();
      body += " with text \"" + *step.input_text + "\"";
    }
  }
  while (!body.empty() && body.back() == '.') body.pop_back();
  if (step.locator) body += locator_annotation(step.locator->strategy, step.locator->value);
  body += '.';
  return body;
}

std::string xml_escape(std::string_view value) {
  std::string out;
  out.reserve(value.size());
  for (char c : value) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\n': out += ' '; break;
      default: out += c;
    }
  }
  return out;
}

std::string clip(std::string_view value) {
  if (value.size() <= kMaxAttributeChars) return std::string(value);
  std::size_t cut = kMaxAttributeChars;
  // Do not split a UTF-8 sequence.
  while (cut > 0 && (static_cast<unsigned char>(value[cut]) & 0xC0) == 0x80) --cut;
  return std::string(value.substr(0, cut)) + "...";
}

void append_attr(std::string& out, std::string_view name, std::string_view value) {
  out += ' ';
  out += name;
  out += "=\"";
  out += xml_escape(clip(value));
  out += '"';
}

std::string differential_step_lines(const MigrationSpec& spec) {
  std::string out;
  for (std::size_t i = 0; i < spec.differential_steps.size(); ++i) {
    const int step_no = static_cast<int>(i) + 1;
    std::string line = std::string(trim(spec.differential_steps[i]));
    while (!line.empty() && line.back() == '.') line.pop_back();
    for (const auto& id : spec.element_identifiers) {
      if (id.step_index == step_no) line += locator_annotation(id.strategy, id.value);
    }
    out += "  - Step-" + std::to_string(step_no) + ": " + line + ".\n";
  }
  return out;
}

std::string old_script_block(const MigrationSpec& spec) {
  std::string script(spec.old_script_text);
  while (!script.empty() && (script.back() == '\n' || script.back() == '\r')) script.pop_back();
  return "- Old test script:\n```python\n" + script + "\n```\n";
}

void check_migration_spec(const MigrationSpec& spec, MigrationKind expected) {
  if (spec.kind != expected) {
    throw Error(ErrorCode::wrong_kind, "expected a " + std::string(to_string(expected)) +
                                           " spec, got " + std::string(to_string(spec.kind)));
  }
  auto missing = validate_migration_spec(spec);
  if (!missing.empty()) {
    std::string joined;
    for (const auto& m : missing) joined += (joined.empty() ? "" : ", ") + m;
    throw Error(ErrorCode::invalid_spec, "missing " + joined, std::move(missing));
  }
}

ChatTranscript single_user_message(std::string content) {
  ChatTranscript t;
  t.append(Role::user, std::move(content));
  return t;
}

// Index one past the '}' closing the object that opens at `open`, or npos.
std::size_t balanced_object_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

constexpr std::string_view kXpathKey = "element-xpath";
constexpr std::string_view kTypeKey = "operation-type";
constexpr std::string_view kTextKey = "operation-text";

std::string json_scalar_text(const json& obj, std::string_view key) {
  auto it = obj.find(std::string(key));
  if (it == obj.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool looks_like_code(std::string_view line) {
  return line.find('(') != std::string_view::npos || line.find('=') != std::string_view::npos ||
         line.find("import") != std::string_view::npos;
}

bool is_block_keyword_line(std::string_view trimmed) {
  static constexpr std::string_view kKeywords[] = {
      "def",   "class", "try",    "except", "finally",  "else",  "elif", "if",
      "for",   "while", "with",   "pass",   "return",   "break", "continue", "raise"};
  std::size_t end = 0;
  while (end < trimmed.size() && is_ident_char(trimmed[end])) ++end;
  const auto first_word = trimmed.substr(0, end);
  if (std::find(std::begin(kKeywords), std::end(kKeywords), first_word) == std::end(kKeywords)) {
    return false;
  }
  return trimmed.back() == ':' || first_word == "pass" || first_word == "return" ||
         first_word == "break" || first_word == "continue" || first_word == "raise";
}

enum class LineClass { blank, code, neutral, prose };

LineClass classify(std::string_view line) {
  const auto trimmed = trim(line);
  if (trimmed.empty()) return LineClass::blank;
  if (looks_like_code(trimmed)) return LineClass::code;
  if (line.front() == ' ' || line.front() == '\t' || trimmed.front() == '#' ||
      is_block_keyword_line(trimmed)) {
    return LineClass::neutral;
  }
  return LineClass::prose;
}

std::string join_lines(const std::vector<std::string_view>& lines, std::size_t begin,
                       std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    out += lines[i];
    if (i + 1 < end) out += '\n';
  }
  return out;
}

}  // namespace

void to_json(json& j, const ScenarioStepSpec& v) {
  j = json{{"page_label", v.page_label}, {"narration", v.narration}};
  j["locator"] = v.locator ? json(*v.locator) : json(nullptr);
  if (v.input_text) j["input_text"] = *v.input_text;
}

void from_json(const json& j, ScenarioStepSpec& v) {
  try {
    v.page_label = j.value("page_label", "");
    v.narration = j.at("narration").get<std::string>();
    v.locator = j.contains("locator") && !j["locator"].is_null()
                    ? std::optional<Locator>(j["locator"].get<Locator>())
                    : std::nullopt;
    v.input_text = j.contains("input_text") && !j["input_text"].is_null()
                       ? std::optional<std::string>(j["input_text"].get<std::string>())
                       : std::nullopt;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema_error, std::string("scenario step: ") + e.what());
  }
  if (v.narration.empty()) throw Error(ErrorCode::schema_error, "scenario step: empty narration");
  if (v.input_text && !v.locator) {
    throw Error(ErrorCode::schema_error, "scenario step: input_text requires a locator");
  }
}

ChatTranscript build_oneshot_generation_prompt(const DeviceConfig& cfg,
                                               const std::vector<ScenarioStepSpec>& steps) {
  if (steps.empty()) throw Error(ErrorCode::empty_steps, "scenario has no steps");

  std::ostringstream msg;
  msg << "Here are the initial values: appium:deviceName=" << cfg.device_name
      << ", appium:appPackage=" << cfg.app_package << ", appium:appActivity=" << cfg.app_activity
      << ", appium:noReset=" << (cfg.no_reset ? "true" : "false")
      << ", appium:fullReset=" << (cfg.full_reset ? "true" : "false") << '\n';

  // Pages in order of first appearance; steps keep their relative order.
  std::vector<std::string> labels;
  std::map<std::string, std::vector<const ScenarioStepSpec*>> by_page;
  for (const auto& step : steps) {
    if (!by_page.contains(step.page_label)) labels.push_back(step.page_label);
    by_page[step.page_label].push_back(&step);
  }

  for (std::size_t p = 0; p < labels.size(); ++p) {
    const auto& page_steps = by_page[labels[p]];
    msg << "Page" << (p + 1) << ":";
    for (std::size_t i = 0; i < page_steps.size(); ++i) {
      std::string sentence = step_sentence(*page_steps[i]);
      if (i > 0) {
        const char* connector =
            (i + 1 == page_steps.size()) ? "Finally, " : (i % 2 == 1 ? "Then, " : "Next, ");
        sentence = connector + lower_first(std::move(sentence));
      }
      msg << ' ' << sentence;
    }
    msg << '\n';
  }
  msg << prompt_text::kOneShotClosing;
  return single_user_message(msg.str());
}

ChatTranscript build_initiation_prompt(std::string_view app_name, std::string_view function_name) {
  if (app_name.empty() || function_name.empty()) {
    throw Error(ErrorCode::empty_arg, "app and function names must be non-empty");
  }
  std::ostringstream msg;
  msg << "You are a software testing engineer.\n"
      << "You are asked to test function \"" << function_name << "\" in app \"" << app_name
      << "\".\n"
      << "You will be provided with necessary XML structure of the current page each turn.\n"
      << "You should perform the following tasks each turn:\n"
      << "<TASK-1> Check whether the function has been tested. If true, summarize all the "
         "actions you have done and say \"DONE\". Otherwise, perform TASK-2.\n"
      << "<TASK-2> Analyze the provided XML structure of the current page. If an appropriate "
         "element for operation can not be found, try drag operations. Describe what to do in "
         "JSON format with the following keys: \"element-xpath\", \"operation-type\", "
         "\"operation-text\".\n"
      << "Repeat what you are going to do and get ready.";
  return single_user_message(msg.str());
}

std::string serialize_element(const UiElement& e) {
  std::string out = "<";
  out += e.class_name.empty() ? "node" : e.class_name;
  append_attr(out, "xpath", e.xpath);
  if (e.resource_id) append_attr(out, "resource-id", *e.resource_id);
  if (e.text) append_attr(out, "text", *e.text);
  if (e.hint) append_attr(out, "hint", *e.hint);
  append_attr(out, "clickable", e.clickable ? "true" : "false");
  append_attr(out, "editable", e.editable ? "true" : "false");
  if (e.checked) append_attr(out, "checked", *e.checked ? "true" : "false");
  out += " />";
  return out;
}

std::string build_exploration_prompt(const std::optional<Action>& prev, PageChange change,
                                     const std::vector<UiElement>& elements) {
  if (prev.has_value() == (change == PageChange::first)) {
    throw Error(ErrorCode::precondition,
                "previous action must be absent exactly on the first exploration round");
  }
  std::vector<std::string> lines;
  if (prev) {
    lines.push_back("Previous " + std::string(to_string(prev->operation_type)) +
                    " operation finished.");
    lines.emplace_back(change == PageChange::new_page ? prompt_text::kNewPage
                                                      : prompt_text::kPageUnchanged);
  }
  for (const auto& e : elements) lines.push_back(serialize_element(e));

  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0) out += '\n';
    out += lines[i];
  }
  return out;
}

std::string build_summarization_prompt() { return std::string(prompt_text::kSummarization); }

ChatTranscript build_crossplatform_prompt(const MigrationSpec& spec) {
  check_migration_spec(spec, MigrationKind::cross_platform);
  std::string msg;
  msg += "You are a software testing engineer.\n";
  msg += "You are asked to do test script migration for a new platform.\n";
  msg += "The information you know is list as follows:\n";
  msg += "- New device name: " + spec.platform_info->new_device_name + "\n";
  msg += "- New Android version: " + spec.platform_info->new_os_version_or_brand + "\n";
  msg += "- Different steps:\n";
  msg += differential_step_lines(spec);
  msg += old_script_block(spec);
  msg += prompt_text::kMigrationClosing;
  return single_user_message(std::move(msg));
}

ChatTranscript build_crossapp_prompt(const MigrationSpec& spec) {
  check_migration_spec(spec, MigrationKind::cross_app);
  std::string msg;
  msg += "You are a software testing engineer.\n";
  msg += "You are asked to do test script migration for an app sharing the same function.\n";
  msg += "The information you know is list as follows:\n";
  msg += "- New app information:\n";
  msg += "  - Package name: " + spec.app_info->package_name + "\n";
  msg += "  - Main activity name: " + spec.app_info->main_activity + "\n";
  msg += "- Different steps:\n";
  msg += differential_step_lines(spec);
  msg += old_script_block(spec);
  msg += prompt_text::kMigrationClosing;
  return single_user_message(std::move(msg));
}

bool contains_word(std::string_view text, std::string_view word) {
  if (word.empty()) return false;
  for (auto pos = text.find(word); pos != std::string_view::npos; pos = text.find(word, pos + 1)) {
    const bool left_ok = pos == 0 || !is_ident_char(text[pos - 1]);
    const auto after = pos + word.size();
    const bool right_ok = after >= text.size() || !is_ident_char(text[after]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

Decision parse_exploration_reply(std::string_view raw) {
  if (contains_word(raw, "DONE")) return Decision::make_done(std::string(trim(raw)));

  for (auto open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
    const auto end = balanced_object_end(raw, open);
    if (end == std::string_view::npos) continue;
    json obj;
    try {
      obj = json::parse(raw.substr(open, end - open));
    } catch (const json::exception&) {
      continue;
    }
    if (!obj.is_object()) continue;
    const bool has_any = obj.contains(std::string(kXpathKey)) ||
                         obj.contains(std::string(kTypeKey)) || obj.contains(std::string(kTextKey));
    if (!has_any) continue;

    if (!obj.contains(std::string(kTypeKey))) {
      return Decision::make_unparseable("bad-operation-type: missing \"operation-type\"",
                                        std::string(raw));
    }
    ActionDraft draft{json_scalar_text(obj, kXpathKey), json_scalar_text(obj, kTypeKey),
                      json_scalar_text(obj, kTextKey)};
    auto checked = validate_action(draft);
    if (auto* err = std::get_if<ActionError>(&checked)) {
      return Decision::make_unparseable(
          std::string(to_string(*err)) + ": operation-type \"" + draft.operation_type +
              "\", element-xpath \"" + draft.element_xpath + "\"",
          std::string(raw));
    }
    return Decision::make_act(std::get<Action>(std::move(checked)));
  }
  return Decision::make_unparseable("no JSON object with the action keys found", std::string(raw));
}

std::optional<std::string> extract_code_block(std::string_view raw) {
  const auto lines = split_lines(raw);

  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!trim(lines[i]).starts_with("```")) continue;
    std::size_t close = i + 1;
    while (close < lines.size() && !trim(lines[close]).starts_with("```")) ++close;
    auto body = join_lines(lines, i + 1, close);
    if (!trim(body).empty()) return body;
    i = close;
  }

  std::optional<std::pair<std::size_t, std::size_t>> best;
  std::size_t i = 0;
  while (i < lines.size()) {
    if (classify(lines[i]) == LineClass::prose) {
      ++i;
      continue;
    }
    std::size_t begin = i;
    while (i < lines.size() && classify(lines[i]) != LineClass::prose) ++i;
    std::size_t end = i;
    while (begin < end && classify(lines[begin]) == LineClass::blank) ++begin;
    while (end > begin && classify(lines[end - 1]) == LineClass::blank) --end;

    std::size_t nonblank = 0;
    std::size_t code = 0;
    for (std::size_t k = begin; k < end; ++k) {
      const auto c = classify(lines[k]);
      if (c != LineClass::blank) ++nonblank;
      if (c == LineClass::code) ++code;
    }
    if (nonblank >= 3 && code * 2 > nonblank) {
      if (!best || end - begin > best->second - best->first) best = {begin, end};
    }
  }
  if (!best) return std::nullopt;
  return join_lines(lines, best->first, best->second);
}

}  // namespace guiscript
