#pragma once

// Device drivers: a deterministic app simulator driven by a JSON app model,
// and a WebDriver/Appium wire-protocol client.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "guiscript/gateway.hpp"
#include "guiscript/model.hpp"

namespace guiscript {

// ---- App model -------------------------------------------------------------

struct ElementState {
  std::string text;
  bool checked = false;

  bool operator==(const ElementState&) const = default;
};

struct Page {
  std::vector<UiElement> elements;
  std::map<std::string, ElementState> state;  // keyed by xpath

  bool operator==(const Page&) const = default;
};

enum class GuardPredicate { checked, text_nonempty, text_equals };

struct GuardConjunct {
  std::string xpath;
  GuardPredicate predicate = GuardPredicate::checked;
  std::string value;  // text_equals only

  bool operator==(const GuardConjunct&) const = default;
};

struct GuardExpr {
  std::vector<GuardConjunct> conjuncts;

  bool operator==(const GuardExpr&) const = default;
};

struct TransitionTrigger {
  std::string element_xpath;  // empty: whole-screen drag
  OperationType action_kind = OperationType::click;

  bool operator==(const TransitionTrigger&) const = default;
};

struct Transition {
  std::string from;
  TransitionTrigger on;
  std::optional<GuardExpr> guard;
  std::string to;

  bool operator==(const Transition&) const = default;
};

struct Popup {
  std::string trigger_page;
  int after_round = 0;
  std::string popup_page;
  std::string dismiss_xpath;

  bool operator==(const Popup&) const = default;
};

struct AppModel {
  std::string name;
  std::string start_page;
  std::map<std::string, Page> pages;
  std::vector<Transition> transitions;
  std::vector<Popup> popups;

  bool operator==(const AppModel&) const = default;
};

// Parses and invariant-checks a model. Throws Error(schema_error) for shape
// problems and Error(invariant_violation) with page/element context otherwise.
AppModel parse_app_model(const json& j);
// As above, plus Error(io_error) when the file cannot be read.
AppModel load_app_model(const std::filesystem::path& path);
// Returns every invariant violation, empty when the model is consistent.
std::vector<std::string> check_app_model(const AppModel& model);

void to_json(json& j, const AppModel& v);

// ---- Drivers ---------------------------------------------------------------

class Driver {
 public:
  virtual ~Driver() = default;

  virtual UiSnapshot snapshot() = 0;
  // Precondition: validate_action(action) succeeds.
  virtual ActionOutcome perform(const Action& action) = 0;
  // full_reset, or neither flag: back to the start with state cleared.
  // no_reset: session state and position are preserved.
  virtual void reset(const DeviceConfig& cfg) = 0;
  // xpath of the element that dismisses a visible pop-up, when the backend
  // can tell.
  virtual std::optional<std::string> pending_popup_dismissal() const { return std::nullopt; }
};

class Simulator final : public Driver {
 public:
  explicit Simulator(AppModel model);

  UiSnapshot snapshot() override;
  ActionOutcome perform(const Action& action) override;
  void reset(const DeviceConfig& cfg) override;
  std::optional<std::string> pending_popup_dismissal() const override;

  // Types into an element without the implicit focus click that perform()
  // issues. Editable elements only accept text while focused.
  ActionOutcome send_keys(const std::string& xpath, const std::string& text);

  const std::string& current_page() const noexcept { return page_; }
  const AppModel& model() const noexcept { return model_; }
  std::size_t actions_performed() const noexcept { return actions_; }
  const std::optional<std::string>& focused() const noexcept { return focus_; }

 private:
  const std::string& visible_page() const;
  UiSnapshot snapshot_of(const std::string& page_id) const;
  bool guard_holds(const std::string& page_id, const std::optional<GuardExpr>& guard) const;
  // Fires a transition for the trigger if one is enabled. Returns whether the
  // trigger matched any transition at all (enabled or not) in `matched`.
  bool fire(const std::string& xpath, OperationType kind, bool& matched);
  OutcomeStatus finish(OutcomeStatus status);
  ActionOutcome outcome(OutcomeStatus status, bool implicit_focus = false);
  void clear_session();

  AppModel model_;
  std::string page_;
  std::map<std::string, std::map<std::string, ElementState>> state_;
  std::optional<std::string> focus_;
  std::size_t actions_ = 0;
  std::optional<std::size_t> active_popup_;
  std::set<std::size_t> fired_popups_;
};

// Android page-source XML (uiautomator / Appium "source") into elements.
// Throws Error(parse_error) on malformed XML.
std::vector<UiElement> parse_page_source(std::string_view xml);

// W3C WebDriver client speaking to an Appium server.
class WebDriverClient final : public Driver {
 public:
  WebDriverClient(std::string server_url, DeviceConfig cfg, std::shared_ptr<Transport> transport);
  ~WebDriverClient() override;

  WebDriverClient(const WebDriverClient&) = delete;
  WebDriverClient& operator=(const WebDriverClient&) = delete;

  void start();
  void quit();

  UiSnapshot snapshot() override;
  ActionOutcome perform(const Action& action) override;
  void reset(const DeviceConfig& cfg) override;

  const std::string& session_id() const noexcept { return session_id_; }

  // Capabilities document sent with POST /session.
  static json capabilities(const DeviceConfig& cfg);

 private:
  json call(const std::string& method, const std::string& path, const json& body = nullptr);
  std::optional<std::string> find_element(const std::string& xpath);
  json swipe_actions(const Action& action, const std::optional<Bounds>& area) const;

  std::string server_url_;
  DeviceConfig cfg_;
  std::shared_ptr<Transport> transport_;
  std::string session_id_;
  std::optional<UiSnapshot> last_snapshot_;
};

}  // namespace guiscript
