#include <fstream>
#include <set>
#include <sstream>

#include "guiscript/device.hpp"
#include "guiscript/error.hpp"

namespace guiscript {

namespace {

std::string_view to_string(GuardPredicate p) {
  switch (p) {
    case GuardPredicate::checked: return "checked";
    case GuardPredicate::text_nonempty: return "text_nonempty";
    case GuardPredicate::text_equals: return "text_equals";
  }
  return "checked";
}

std::optional<GuardPredicate> parse_predicate(std::string_view text) {
  for (auto p : {GuardPredicate::checked, GuardPredicate::text_nonempty, GuardPredicate::text_equals}) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

[[noreturn]] void schema_fail(const std::string& what) { throw Error(ErrorCode::schema_error, what); }

const json& member(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) schema_fail(where + ": missing '" + key + "'");
  return j.at(key);
}

std::string string_member(const json& j, const char* key, const std::string& where) {
  const auto& v = member(j, key, where);
  if (!v.is_string()) schema_fail(where + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

GuardExpr parse_guard(const json& j, const std::string& where) {
  GuardExpr guard;
  const auto& conjuncts = member(j, "conjuncts", where);
  if (!conjuncts.is_array()) schema_fail(where + ": 'conjuncts' must be an array");
  for (std::size_t i = 0; i < conjuncts.size(); ++i) {
    const auto at = where + ".conjuncts[" + std::to_string(i) + "]";
    GuardConjunct c;
    c.xpath = string_member(conjuncts[i], "xpath", at);
    const auto pred = string_member(conjuncts[i], "predicate", at);
    auto parsed = parse_predicate(pred);
    if (!parsed) schema_fail(at + ": unknown predicate '" + pred + "'");
    c.predicate = *parsed;
    if (c.predicate == GuardPredicate::text_equals) c.value = string_member(conjuncts[i], "value", at);
    guard.conjuncts.push_back(std::move(c));
  }
  return guard;
}

bool page_has(const AppModel& m, const std::string& page_id, const std::string& xpath) {
  auto it = m.pages.find(page_id);
  if (it == m.pages.end()) return false;
  for (const auto& e : it->second.elements) {
    if (e.xpath == xpath) return true;
  }
  return false;
}

// Two guarded transitions can only be told apart when both pin the same
// element's text to different values.
bool guards_disjoint(const std::optional<GuardExpr>& a, const std::optional<GuardExpr>& b) {
  if (!a || !b) return false;
  for (const auto& ca : a->conjuncts) {
    if (ca.predicate != GuardPredicate::text_equals) continue;
    for (const auto& cb : b->conjuncts) {
      if (cb.predicate == GuardPredicate::text_equals && cb.xpath == ca.xpath && cb.value != ca.value) {
        return true;
      }
    }
  }
  return false;
}

}  // namespace

std::vector<std::string> check_app_model(const AppModel& m) {
  std::vector<std::string> problems;
  if (!m.pages.contains(m.start_page)) {
    problems.push_back("start_page '" + m.start_page + "' is not a page");
  }
  for (const auto& [id, page] : m.pages) {
    std::set<std::string> seen;
    for (const auto& e : page.elements) {
      if (e.xpath.empty()) problems.push_back("page '" + id + "': element with empty xpath");
      if (!seen.insert(e.xpath).second) {
        problems.push_back("page '" + id + "': duplicate xpath '" + e.xpath + "'");
      }
    }
    for (const auto& [xpath, _] : page.state) {
      if (!seen.contains(xpath)) {
        problems.push_back("page '" + id + "': state for unknown element '" + xpath + "'");
      }
    }
  }
  for (std::size_t i = 0; i < m.transitions.size(); ++i) {
    const auto& t = m.transitions[i];
    const auto where = "transition " + std::to_string(i) + " (" + t.from + " -> " + t.to + ")";
    if (!m.pages.contains(t.from)) problems.push_back(where + ": unknown source page '" + t.from + "'");
    if (!m.pages.contains(t.to)) problems.push_back(where + ": unknown target page '" + t.to + "'");
    const bool whole_screen = t.on.action_kind == OperationType::drag && t.on.element_xpath.empty();
    if (!whole_screen && m.pages.contains(t.from) && !page_has(m, t.from, t.on.element_xpath)) {
      problems.push_back(where + ": element '" + t.on.element_xpath + "' is not on page '" + t.from + "'");
    }
    if (t.guard) {
      for (const auto& c : t.guard->conjuncts) {
        if (m.pages.contains(t.from) && !page_has(m, t.from, c.xpath)) {
          problems.push_back(where + ": guard references '" + c.xpath + "' not on page '" + t.from + "'");
        }
      }
    }
    for (std::size_t k = i + 1; k < m.transitions.size(); ++k) {
      const auto& u = m.transitions[k];
      if (u.from == t.from && u.on == t.on && !guards_disjoint(t.guard, u.guard)) {
        problems.push_back(where + " and transition " + std::to_string(k) +
                           " can both fire for element '" + t.on.element_xpath + "' on page '" +
                           t.from + "'");
      }
    }
  }
  for (std::size_t i = 0; i < m.popups.size(); ++i) {
    const auto& p = m.popups[i];
    const auto where = "popup " + std::to_string(i);
    if (!m.pages.contains(p.trigger_page)) problems.push_back(where + ": unknown trigger_page '" + p.trigger_page + "'");
    if (!m.pages.contains(p.popup_page)) {
      problems.push_back(where + ": unknown popup_page '" + p.popup_page + "'");
    } else if (!page_has(m, p.popup_page, p.dismiss_xpath)) {
      problems.push_back(where + ": dismiss element '" + p.dismiss_xpath + "' is not on page '" + p.popup_page + "'");
    }
    if (p.after_round < 0) problems.push_back(where + ": after_round is negative");
  }
  return problems;
}

AppModel parse_app_model(const json& j) {
  if (!j.is_object()) schema_fail("app model must be a JSON object");
  AppModel m;
  try {
    m.name = string_member(j, "name", "model");
    m.start_page = string_member(j, "start_page", "model");

    const auto& pages = member(j, "pages", "model");
    if (!pages.is_object()) schema_fail("model: 'pages' must be an object");
    for (const auto& [id, pj] : pages.items()) {
      const auto where = "page '" + id + "'";
      Page page;
      page.elements = member(pj, "elements", where).get<std::vector<UiElement>>();
      if (pj.contains("state")) {
        for (const auto& [xpath, sj] : pj.at("state").items()) {
          page.state[xpath] = ElementState{sj.value("text", ""), sj.value("checked", false)};
        }
      }
      m.pages.emplace(id, std::move(page));
    }

    if (j.contains("transitions")) {
      const auto& ts = j.at("transitions");
      for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto where = "transition " + std::to_string(i);
        Transition t;
        t.from = string_member(ts[i], "from", where);
        t.to = string_member(ts[i], "to", where);
        const auto& on = member(ts[i], "on", where);
        t.on.element_xpath = on.value("element_xpath", "");
        const auto kind = string_member(on, "action_kind", where + ".on");
        auto parsed = parse_operation_type(kind);
        if (!parsed) schema_fail(where + ": unknown action_kind '" + kind + "'");
        t.on.action_kind = *parsed;
        if (ts[i].contains("guard") && !ts[i]["guard"].is_null()) {
          t.guard = parse_guard(ts[i]["guard"], where + ".guard");
        }
        m.transitions.push_back(std::move(t));
      }
    }

    if (j.contains("popups")) {
      const auto& ps = j.at("popups");
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto where = "popup " + std::to_string(i);
        Popup p;
        p.trigger_page = string_member(ps[i], "trigger_page", where);
        p.after_round = member(ps[i], "after_round", where).get<int>();
        p.popup_page = string_member(ps[i], "popup_page", where);
        p.dismiss_xpath = string_member(ps[i], "dismiss_xpath", where);
        m.popups.push_back(std::move(p));
      }
    }
  } catch (const json::exception& e) {
    schema_fail(std::string("app model: ") + e.what());
  }

  auto problems = check_app_model(m);
  if (!problems.empty()) {
    const auto first = problems.front();
    throw Error(ErrorCode::invariant_violation, first, std::move(problems));
  }
  return m;
}

AppModel load_app_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open app model " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto text = buffer.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::schema_error, path.string() + " is empty");
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema_error, path.string() + ": " + e.what());
  }
  return parse_app_model(j);
}

void to_json(json& j, const AppModel& m) {
  json pages = json::object();
  for (const auto& [id, page] : m.pages) {
    json state = json::object();
    for (const auto& [xpath, s] : page.state) state[xpath] = {{"text", s.text}, {"checked", s.checked}};
    pages[id] = {{"elements", page.elements}, {"state", state}};
  }
  json transitions = json::array();
  for (const auto& t : m.transitions) {
    json tj{{"from", t.from},
            {"on", {{"element_xpath", t.on.element_xpath}, {"action_kind", to_string(t.on.action_kind)}}},
            {"to", t.to}};
    if (t.guard) {
      json conj = json::array();
      for (const auto& c : t.guard->conjuncts) {
        json cj{{"xpath", c.xpath}, {"predicate", to_string(c.predicate)}};
        if (c.predicate == GuardPredicate::text_equals) cj["value"] = c.value;
        conj.push_back(cj);
      }
      tj["guard"] = {{"conjuncts", conj}};
    } else {
      tj["guard"] = nullptr;
    }
    transitions.push_back(tj);
  }
  json popups = json::array();
  for (const auto& p : m.popups) {
    popups.push_back({{"trigger_page", p.trigger_page},
                      {"after_round", p.after_round},
                      {"popup_page", p.popup_page},
                      {"dismiss_xpath", p.dismiss_xpath}});
  }
  j = json{{"name", m.name},
           {"start_page", m.start_page},
           {"pages", pages},
           {"transitions", transitions},
           {"popups", popups}};
}

}  // namespace guiscript
