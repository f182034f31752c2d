#include "guiscript/synth.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

#include "guiscript/error.hpp"
#include "guiscript/explorer.hpp"
#include "guiscript/prompts.hpp"

namespace guiscript {

namespace {

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\n') {
      if (!current.empty() && current.back() == '\r') current.pop_back();
      lines.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) lines.push_back(std::move(current));
  return lines;
}

// Drops a trailing '#' comment; with blank_strings, string literal contents
// are replaced by spaces so columns still line up with the original.
std::string code_part(std::string_view line, bool blank_strings) {
  std::string out(line);
  char quote = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const char c = out[i];
    if (quote) {
      if (c == '\\' && i + 1 < out.size()) {
        if (blank_strings) out[i] = out[i + 1] = ' ';
        ++i;
      } else if (c == quote) {
        quote = 0;
      } else if (blank_strings) {
        out[i] = ' ';
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      out.resize(i);
      break;
    }
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::size_t indent_of(std::string_view line) {
  const auto first = line.find_first_not_of(" \t");
  return first == std::string_view::npos ? line.size() : first;
}

// Resource id when the element has one that is unique on the page.
Locator locator_for(const UiSnapshot& snapshot, const std::string& xpath) {
  if (const auto* e = snapshot.find(xpath); e && e->resource_id && !e->resource_id->empty()) {
    const auto same_id = std::count_if(snapshot.elements.begin(), snapshot.elements.end(),
                                       [&](const UiElement& o) { return o.resource_id == e->resource_id; });
    if (same_id == 1) return {LocatorStrategy::id, *e->resource_id};
  }
  return {LocatorStrategy::xpath, xpath};
}

std::string py_string(std::string_view value) {
  std::string out = "\"";
  for (char c : value) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string py_bool(bool b) { return b ? "True" : "False"; }

std::string seconds(int ms) {
  std::ostringstream out;
  if (ms % 1000 == 0) {
    out << ms / 1000;
  } else {
    out << ms / 1000 << '.';
    std::string frac = std::to_string(1000 + ms % 1000).substr(1);
    while (!frac.empty() && frac.back() == '0') frac.pop_back();
    out << frac;
  }
  return out.str();
}

std::string wait_locate(const Locator& loc) {
  return "wait.until(EC.presence_of_element_located((By." +
         std::string(loc.strategy == LocatorStrategy::id ? "ID" : "XPATH") + ", " +
         py_string(loc.value) + ")))";
}

// ---- lint helpers ----------------------------------------------------------

const std::regex& variant1() {
  static const std::regex re(
      R"(EC\.(presence_of_element_located|visibility_of_element_located|element_to_be_clickable|presence_of_all_elements_located)\s*\()");
  return re;
}
const std::regex& variant2() {
  static const std::regex re(R"(\.find_elements?\s*\()");
  return re;
}
const std::regex& variant3() {
  static const std::regex re(R"(find_elements?_by_\w+\s*\()");
  return re;
}

bool has_wait_construct(std::string_view line) {
  for (std::string_view marker : {"time.sleep(", "WebDriverWait(", ".until(", "implicitly_wait(", "wait_activity("}) {
    if (line.find(marker) != std::string_view::npos) return true;
  }
  return false;
}

bool is_navigation_comment(std::string_view line) {
  const auto t = trim(line);
  if (!t.starts_with("#")) return false;
  std::string lower(t);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (std::string_view marker : {"navigat", "new page", "page load", "loading"}) {
    if (lower.find(marker) != std::string::npos) return true;
  }
  return false;
}

bool is_element_access(const std::string& line) {
  return std::regex_search(line, variant1()) || std::regex_search(line, variant2()) ||
         std::regex_search(line, variant3());
}

bool is_identifier(std::string_view s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s.front()))) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '.';
  });
}

bool assigns(std::string_view line, std::string_view name) {
  const auto t = trim(line);
  if (!t.starts_with(name)) return false;
  const auto rest = trim(t.substr(name.size()));
  return rest.starts_with("=") && !rest.starts_with("==");
}

bool focuses(std::string_view line, std::string_view target) {
  const std::string click = std::string(target) + ".click()";
  const std::string tap = "tap(" + std::string(target);
  return line.find(click) != std::string_view::npos || line.find(tap) != std::string_view::npos;
}

void lint_input_focus(const std::vector<std::string>& lines, std::vector<LintFinding>& out) {
  static const std::string kSendKeys = ".send_keys(";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto pos = code_part(lines[i], true).find(kSendKeys);
    if (pos == std::string::npos) continue;
    const std::string target(trim(std::string_view(lines[i]).substr(0, pos)));
    if (target.empty()) continue;
    const bool named = is_identifier(target);
    const auto indent = indent_of(lines[i]);

    bool focused = false;
    for (std::size_t k = i; k-- > 0;) {
      if (trim(lines[k]).empty() || indent_of(lines[k]) < indent) break;
      const auto prev = code_part(lines[k], false);
      if (focuses(prev, target)) {
        focused = true;
        break;
      }
      if (named && assigns(prev, target)) break;
    }
    if (!focused) {
      out.push_back({std::string(lint_rule::kInputWithoutFocus), static_cast<int>(i + 1),
                     "send_keys on '" + target + "' without clicking it first in the same block"});
    }
  }
}

}  // namespace

// ---- synthesis -------------------------------------------------------------

TestScript synthesize_from_trace(const ExplorationTrace& trace, const DeviceConfig& cfg,
                                 const SynthOptions& options) {
  if (trace.terminal != Terminal::done) {
    throw Error(ErrorCode::trace_not_done,
                "trace ended with '" + std::string(to_string(trace.terminal)) + "'");
  }
  TestScript script;
  script.config = cfg;
  script.scenario_name = trace.scenario_name;

  for (const auto& round : trace.rounds) {
    if (round.decision.variant != Decision::Variant::act || !round.decision.action) continue;
    const auto status = round.outcome.status;
    if (status != OutcomeStatus::ok && status != OutcomeStatus::popup_appeared) continue;

    const auto& a = *round.decision.action;
    TestStep step;
    switch (a.operation_type) {
      case OperationType::click:
        step.kind = StepKind::click;
        step.locator = locator_for(round.snapshot, a.element_xpath);
        break;
      case OperationType::input:
        step.kind = StepKind::input;
        step.locator = locator_for(round.snapshot, a.element_xpath);
        step.text = a.operation_text;
        break;
      case OperationType::drag:
        step.kind = StepKind::drag;
        if (!a.element_xpath.empty()) step.locator = locator_for(round.snapshot, a.element_xpath);
        step.text = a.operation_text;
        break;
    }
    script.steps.push_back(std::move(step));

    if (round.outcome.new_snapshot.page_fingerprint != round.snapshot.page_fingerprint &&
        options.page_wait_ms > 0) {
      script.steps.push_back(TestStep{std::nullopt, StepKind::wait, std::nullopt, options.page_wait_ms});
    }
  }
  if (script.steps.empty()) {
    throw Error(ErrorCode::trace_not_done, "trace contains no effective action");
  }
  return script;
}

std::optional<std::string> synthesize_via_llm(const ChatTranscript& transcript, Gateway& gateway,
                                              std::optional<std::int64_t> token_budget) {
  ChatTranscript request = transcript;
  request.append(Role::user, build_summarization_prompt());
  if (token_budget) request = trim_transcript(request, *token_budget);
  const auto reply = gateway.complete(request);
  return extract_code_block(reply);
}

std::string render(const TestScript& script) {
  if (auto bad = validate_script(script)) {
    throw Error(ErrorCode::precondition, "invalid test script: " + *bad);
  }
  const auto& cfg = script.config;
  std::ostringstream out;
  out << "# Appium test script";
  if (!script.scenario_name.empty()) {
    std::string name = script.scenario_name;
    std::replace_if(name.begin(), name.end(), [](char c) { return c == '\n' || c == '\r'; }, ' ');
    out << ": " << name;
  }
  out << "\n"
      << "import time\n"
      << "\n"
      << "from appium import webdriver\n"
      << "from appium.options.common import AppiumOptions\n"
      << "from selenium.webdriver.common.by import By\n"
      << "from selenium.webdriver.support import expected_conditions as EC\n"
      << "from selenium.webdriver.support.ui import WebDriverWait\n"
      << "\n"
      << "caps = {\n"
      << "    \"platformName\": \"Android\",\n"
      << "    \"appium:deviceName\": " << py_string(cfg.device_name) << ",\n"
      << "    \"appium:appPackage\": " << py_string(cfg.app_package) << ",\n"
      << "    \"appium:appActivity\": " << py_string(cfg.app_activity) << ",\n"
      << "    \"appium:noReset\": " << py_bool(cfg.no_reset) << ",\n"
      << "    \"appium:fullReset\": " << py_bool(cfg.full_reset) << ",\n"
      << "}\n"
      << "\n"
      << "driver = webdriver.Remote(\"http://127.0.0.1:4723\", "
         "options=AppiumOptions().load_capabilities(caps))\n"
      << "wait = WebDriverWait(driver, 10)\n"
      << "\n"
      << "try:\n";

  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    const auto& step = script.steps[i];
    if (i > 0) out << "\n";
    out << "    # Step " << (i + 1) << ": ";
    switch (step.kind) {
      case StepKind::click:
        out << "click\n"
            << "    el = " << wait_locate(*step.locator) << "\n"
            << "    el.click()\n";
        break;
      case StepKind::input:
        out << "input\n"
            << "    el = " << wait_locate(*step.locator) << "\n"
            << "    el.click()\n"
            << "    el.send_keys(" << py_string(*step.text) << ")\n";
        break;
      case StepKind::drag:
        out << "drag " << *step.text << "\n";
        if (step.locator) {
          out << "    el = " << wait_locate(*step.locator) << "\n"
              << "    driver.execute_script(\"mobile: swipeGesture\", {\"elementId\": el.id, "
                 "\"direction\": "
              << py_string(*step.text) << ", \"percent\": 0.75})\n";
        } else {
          out << "    size = driver.get_window_size()\n"
              << "    driver.execute_script(\"mobile: swipeGesture\", {\"left\": 0, \"top\": 0, "
                 "\"width\": size[\"width\"], \"height\": size[\"height\"], \"direction\": "
              << py_string(*step.text) << ", \"percent\": 0.75})\n";
        }
        break;
      case StepKind::wait:
        out << "wait for the page to load after navigation\n"
            << "    time.sleep(" << seconds(step.wait_before_ms) << ")\n";
        break;
    }
  }
  out << "finally:\n"
      << "    driver.quit()\n";
  return out.str();
}

// ---- lint ------------------------------------------------------------------

void to_json(json& j, const LintFinding& v) {
  j = json{{"rule", v.rule}, {"line", v.line}, {"message", v.message}};
}

void from_json(const json& j, LintFinding& v) {
  v.rule = j.at("rule").get<std::string>();
  v.line = j.at("line").get<int>();
  v.message = j.value("message", "");
}

std::vector<LintFinding> lint(std::string_view script_text) {
  const auto lines = split_lines(script_text);
  std::vector<std::string> code;
  for (const auto& l : lines) code.push_back(code_part(l, true));
  std::vector<LintFinding> findings;

  // DEPRECATED_API and MIXED_LOCATOR_STYLE
  std::optional<int> first_line[3];
  std::optional<std::pair<int, int>> mixed_at;  // line, variant
  const std::regex* variants[3] = {&variant1(), &variant2(), &variant3()};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i + 1);
    for (auto it = std::sregex_iterator(code[i].begin(), code[i].end(), variant3());
         it != std::sregex_iterator(); ++it) {
      findings.push_back({std::string(lint_rule::kDeprecatedApi), line_no,
                          "'" + it->str() + "' is deprecated; locate elements with "
                                            "wait.until(EC.presence_of_element_located(...))"});
    }
    for (int v = 0; v < 3; ++v) {
      if (first_line[v] || !std::regex_search(code[i], *variants[v])) continue;
      first_line[v] = line_no;
      const int distinct = static_cast<int>(std::count_if(std::begin(first_line), std::end(first_line),
                                                          [](const auto& f) { return f.has_value(); }));
      if (distinct == 2 && !mixed_at) mixed_at = {{line_no, v}};
    }
  }
  if (mixed_at) {
    static constexpr const char* kNames[3] = {"explicit wait (EC.*_located)", "find_element(By...)",
                                              "find_element_by_*"};
    std::string used;
    for (int v = 0; v < 3; ++v) {
      if (!first_line[v]) continue;
      used += (used.empty() ? "" : ", ") + std::string(kNames[v]) + " from line " +
              std::to_string(*first_line[v]);
    }
    findings.push_back({std::string(lint_rule::kMixedLocatorStyle), mixed_at->first,
                        "several element-locating APIs in one script: " + used});
  }

  // MISSING_WAIT
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!is_navigation_comment(lines[i])) continue;
    for (std::size_t k = i + 1; k < lines.size(); ++k) {
      if (!is_element_access(code[k])) continue;
      bool waited = has_wait_construct(code[k]);
      for (std::size_t back = 1; back <= 3 && back <= k && !waited; ++back) {
        waited = has_wait_construct(code[k - back]);
      }
      if (!waited) {
        findings.push_back({std::string(lint_rule::kMissingWait), static_cast<int>(k + 1),
                            "element accessed right after navigation without a wait"});
      }
      break;
    }
  }

  lint_input_focus(lines, findings);

  // NO_CAPS
  std::string missing;
  for (std::string_view key : {"appium:deviceName", "appium:appPackage", "appium:appActivity",
                               "appium:noReset", "appium:fullReset"}) {
    if (script_text.find(key) == std::string_view::npos) {
      missing += (missing.empty() ? "" : ", ") + std::string(key);
    }
  }
  if (!missing.empty()) {
    findings.push_back({std::string(lint_rule::kNoCaps), 1, "missing capabilities: " + missing});
  }

  std::stable_sort(findings.begin(), findings.end(),
                   [](const LintFinding& a, const LintFinding& b) { return a.line < b.line; });
  return findings;
}

// ---- migration -------------------------------------------------------------

std::vector<std::string> validate_migration_spec(const MigrationSpec& spec) {
  std::vector<std::string> missing;
  auto blank = [](const std::string& s) { return trim(s).empty(); };

  if (spec.kind == MigrationKind::cross_platform) {
    if (!spec.platform_info || blank(spec.platform_info->new_device_name)) {
      missing.emplace_back("new_device_name");
    }
    if (!spec.platform_info || blank(spec.platform_info->new_os_version_or_brand)) {
      missing.emplace_back("new_os_version_or_brand");
    }
  } else {
    if (!spec.app_info || blank(spec.app_info->package_name)) missing.emplace_back("package_name");
    if (!spec.app_info || blank(spec.app_info->main_activity)) missing.emplace_back("main_activity");
  }

  if (spec.differential_steps.empty()) {
    missing.emplace_back("differential_steps");
  }
  for (std::size_t i = 0; i < spec.differential_steps.size(); ++i) {
    if (blank(spec.differential_steps[i])) {
      missing.push_back("differential_steps[step " + std::to_string(i + 1) + "]");
    }
  }

  if (spec.kind == MigrationKind::cross_platform) {
    for (std::size_t i = 0; i < spec.differential_steps.size(); ++i) {
      const int step_no = static_cast<int>(i + 1);
      const bool covered = std::any_of(
          spec.element_identifiers.begin(), spec.element_identifiers.end(),
          [&](const ElementIdentifier& id) { return id.step_index == step_no && !blank(id.value); });
      if (!covered) missing.push_back("element_identifiers[step " + std::to_string(step_no) + "]");
    }
  }

  if (blank(spec.old_script_text)) missing.emplace_back("old_script_text");
  return missing;
}

int changed_line_count(std::string_view old_text, std::string_view new_text) {
  auto normalize = [](std::string_view text) {
    auto lines = split_lines(text);
    for (auto& l : lines) {
      while (!l.empty() && (l.back() == ' ' || l.back() == '\t')) l.pop_back();
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
  };
  const auto a = normalize(old_text);
  const auto b = normalize(new_text);
  std::vector<std::vector<int>> lcs(a.size() + 1, std::vector<int>(b.size() + 1, 0));
  for (std::size_t i = a.size(); i-- > 0;) {
    for (std::size_t k = b.size(); k-- > 0;) {
      lcs[i][k] = a[i] == b[k] ? lcs[i + 1][k + 1] + 1 : std::max(lcs[i + 1][k], lcs[i][k + 1]);
    }
  }
  const int common = lcs[0][0];
  return static_cast<int>(a.size() + b.size()) - 2 * common;
}

void to_json(json& j, const MigrationReport& v) {
  j = json{{"script_text", v.script_text},
           {"findings", v.findings},
           {"changed_line_count", v.changed_line_count},
           {"unchanged", v.unchanged}};
}

MigrationReport migrate(const MigrationSpec& spec, Gateway& gateway) {
  auto missing = validate_migration_spec(spec);
  if (!missing.empty()) {
    std::string joined;
    for (const auto& m : missing) joined += (joined.empty() ? "" : ", ") + m;
    throw Error(ErrorCode::invalid_spec, "missing " + joined, std::move(missing));
  }
  const auto prompt = spec.kind == MigrationKind::cross_platform ? build_crossplatform_prompt(spec)
                                                                 : build_crossapp_prompt(spec);
  const auto reply = gateway.complete(prompt);
  auto script = extract_code_block(reply);
  if (!script) throw Error(ErrorCode::extraction_failed, "the reply contains no test script");

  MigrationReport report;
  report.script_text = std::move(*script);
  report.findings = lint(report.script_text);
  report.changed_line_count = changed_line_count(spec.old_script_text, report.script_text);
  report.unchanged = report.changed_line_count == 0;
  return report;
}

// ---- replay ----------------------------------------------------------------

void to_json(json& j, const ReplayReport& v) {
  json failures = json::array();
  for (const auto& f : v.failures) {
    failures.push_back({{"step", f.step}, {"status", to_string(f.status)}, {"detail", f.detail}});
  }
  j = json{{"reached_fingerprint", v.reached_fingerprint}, {"failures", failures}};
}

ReplayReport replay_script(const TestScript& script, Driver& driver) {
  if (auto bad = validate_script(script)) {
    throw Error(ErrorCode::precondition, "invalid test script: " + *bad);
  }
  ReplayReport report;
  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    const auto& step = script.steps[i];
    const int step_no = static_cast<int>(i + 1);
    if (step.kind == StepKind::wait) continue;

    std::string xpath;
    if (step.locator) {
      const auto snap = driver.snapshot();
      if (step.locator->strategy == LocatorStrategy::xpath) {
        if (snap.find(step.locator->value)) xpath = step.locator->value;
      } else {
        for (const auto& e : snap.elements) {
          if (e.resource_id == step.locator->value) {
            xpath = e.xpath;
            break;
          }
        }
      }
      if (xpath.empty()) {
        report.failures.push_back({step_no, OutcomeStatus::element_not_found,
                                   std::string(to_string(step.locator->strategy)) + " '" +
                                       step.locator->value + "' not on the current page"});
        break;
      }
    }

    Action action;
    action.element_xpath = xpath;
    switch (step.kind) {
      case StepKind::click:
        action.operation_type = OperationType::click;
        break;
      case StepKind::input:
        action.operation_type = OperationType::input;
        action.operation_text = *step.text;
        break;
      case StepKind::drag:
        action.operation_type = OperationType::drag;
        action.operation_text = *step.text;
        break;
      case StepKind::wait:
        break;
    }
    const auto outcome = driver.perform(action);
    if (outcome.status == OutcomeStatus::element_not_found ||
        outcome.status == OutcomeStatus::no_effect) {
      report.failures.push_back({step_no, outcome.status,
                                 std::string(to_string(action.operation_type)) + " had no effect"});
      break;
    }
  }
  report.reached_fingerprint = driver.snapshot().page_fingerprint;
  return report;
}

}  // namespace guiscript
