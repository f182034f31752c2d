#pragma once

// Shared helpers for the test binaries.

#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "guiscript/device.hpp"
#include "guiscript/error.hpp"
#include "guiscript/gateway.hpp"
#include "guiscript/model.hpp"

namespace testsupport {

using namespace guiscript;

inline std::filesystem::path data_dir() { return GUISCRIPT_DATA_DIR; }
inline std::filesystem::path data(const std::string& rel) { return data_dir() / rel; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::vector<std::string> replies_from(const std::string& rel) {
  return json::parse(slurp(data(rel)))["replies"].get<std::vector<std::string>>();
}

inline DeviceConfig mail_config() { return json::parse(slurp(data("configs/mail.json"))).get<DeviceConfig>(); }

// Scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("guiscript-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Any use is a test failure.
struct FailingTransport : Transport {
  int uses = 0;
  HttpResponse send(const HttpRequest&) override {
    ++uses;
    throw Error(ErrorCode::transport_error, "network access is not allowed here");
  }
};

// Answers chat-completion requests with canned replies, in order.
struct FakeChatTransport : Transport {
  std::vector<std::string> replies;
  std::vector<HttpRequest> requests;

  explicit FakeChatTransport(std::vector<std::string> r) : replies(std::move(r)) {}

  HttpResponse send(const HttpRequest& request) override {
    requests.push_back(request);
    const auto& reply = replies.at(std::min(requests.size() - 1, replies.size() - 1));
    json body{{"id", "chatcmpl-test"},
              {"choices", json::array({{{"index", 0},
                                        {"message", {{"role", "assistant"}, {"content", reply}}},
                                        {"finish_reason", "stop"}}})}};
    return {200, body.dump()};
  }
};

// Transport returning a scripted sequence of raw responses (or failures).
struct SequenceTransport : Transport {
  struct Step {
    int status = 200;
    std::string body;
    bool throw_transport = false;
    bool throw_timeout = false;
  };
  std::deque<Step> steps;
  int calls = 0;

  HttpResponse send(const HttpRequest&) override {
    ++calls;
    if (steps.empty()) throw Error(ErrorCode::transport_error, "sequence exhausted");
    auto s = steps.front();
    steps.pop_front();
    if (s.throw_transport) throw Error(ErrorCode::transport_error, "connection refused");
    if (s.throw_timeout) throw Error(ErrorCode::timeout, "timed out");
    return {s.status, s.body};
  }
};

inline std::string chat_body(const std::string& content) {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

inline GatewayHooks offline_hooks(std::shared_ptr<Transport> transport = nullptr) {
  GatewayHooks h;
  h.transport = transport ? transport : std::make_shared<FailingTransport>();
  h.sleep = [](std::chrono::milliseconds) {};
  h.getenv = [](const std::string&) { return std::optional<std::string>("sk-test-key"); };
  return h;
}

inline Gateway scripted_gateway(std::vector<std::string> replies) {
  GatewayConfig cfg;
  cfg.mode = GatewayMode::scripted;
  auto hooks = offline_hooks();
  hooks.policy = scripted_replies(std::move(replies));
  return Gateway(cfg, hooks);
}

inline std::string act_json(const std::string& xpath, const std::string& type, const std::string& text = "") {
  return json{{"element-xpath", xpath}, {"operation-type", type}, {"operation-text", text}}.dump();
}

// ---- Reachability oracle ---------------------------------------------------
//
// Brute force over (page, element state) configurations, written independently
// of the simulator: every action on every element of the visible page is tried,
// with the model's own transition table and guard predicates. Pop-ups are
// ignored (they do not change which page is underneath).

struct OracleState {
  std::string page;
  std::map<std::string, std::map<std::string, std::pair<std::string, bool>>> elements;

  bool operator<(const OracleState& o) const {
    return std::tie(page, elements) < std::tie(o.page, o.elements);
  }
};

inline OracleState oracle_start(const AppModel& m) {
  OracleState s;
  s.page = m.start_page;
  for (const auto& [id, page] : m.pages) {
    for (const auto& e : page.elements) {
      auto it = page.state.find(e.xpath);
      std::string text = it != page.state.end() ? it->second.text : e.text.value_or("");
      bool checked = it != page.state.end() ? it->second.checked : e.checked.value_or(false);
      s.elements[id][e.xpath] = {text, checked};
    }
  }
  return s;
}

inline bool oracle_guard(const OracleState& s, const Transition& t) {
  if (!t.guard) return true;
  for (const auto& c : t.guard->conjuncts) {
    const auto& [text, checked] = s.elements.at(t.from).at(c.xpath);
    if (c.predicate == GuardPredicate::checked && !checked) return false;
    if (c.predicate == GuardPredicate::text_nonempty && text.empty()) return false;
    if (c.predicate == GuardPredicate::text_equals && text != c.value) return false;
  }
  return true;
}

// Applies one action; returns false when the action is impossible (element not
// on the page). Inputs always set the text.
inline bool oracle_step(const AppModel& m, OracleState& s, const Action& a) {
  const auto& page = m.pages.at(s.page);
  const UiElement* el = nullptr;
  for (const auto& e : page.elements) {
    if (e.xpath == a.element_xpath) el = &e;
  }
  if (!a.element_xpath.empty() && el == nullptr) return false;
  if (a.operation_type == OperationType::click && el->checked) {
    auto& st = s.elements[s.page][a.element_xpath];
    st.second = !st.second;
  }
  if (a.operation_type == OperationType::input) {
    if (!el->editable) return true;
    s.elements[s.page][a.element_xpath].first = a.operation_text;
  }
  for (const auto& t : m.transitions) {
    if (t.from == s.page && t.on.action_kind == a.operation_type && t.on.element_xpath == a.element_xpath &&
        oracle_guard(s, t)) {
      s.page = t.to;
      break;
    }
  }
  return true;
}

// Pages reachable from the start by any action sequence, where inputs may set
// any text in `alphabet`.
inline std::set<std::string> oracle_reachable_pages(const AppModel& m,
                                                    const std::vector<std::string>& alphabet = {"", "x"}) {
  std::set<OracleState> seen;
  std::deque<OracleState> queue;
  auto start = oracle_start(m);
  seen.insert(start);
  queue.push_back(start);
  std::set<std::string> pages;
  while (!queue.empty()) {
    auto s = queue.front();
    queue.pop_front();
    pages.insert(s.page);
    std::vector<Action> actions;
    for (const auto& e : m.pages.at(s.page).elements) {
      actions.push_back({e.xpath, OperationType::click, ""});
      for (const auto& text : alphabet) {
        if (!text.empty()) actions.push_back({e.xpath, OperationType::input, text});
      }
      for (const char* dir : {"up", "down", "left", "right"}) {
        actions.push_back({e.xpath, OperationType::drag, dir});
      }
    }
    for (const char* dir : {"up", "down", "left", "right"}) actions.push_back({"", OperationType::drag, dir});
    for (const auto& a : actions) {
      auto next = s;
      if (!oracle_step(m, next, a)) continue;
      if (seen.insert(next).second) queue.push_back(next);
    }
  }
  return pages;
}

// Page reached by applying an action sequence from the start.
inline std::string oracle_run(const AppModel& m, const std::vector<Action>& actions) {
  auto s = oracle_start(m);
  for (const auto& a : actions) oracle_step(m, s, a);
  return s.page;
}

}  // namespace testsupport
