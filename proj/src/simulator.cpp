#include "guiscript/device.hpp"
#include "guiscript/error.hpp"

namespace guiscript {

Simulator::Simulator(AppModel model) : model_(std::move(model)) {
  if (auto problems = check_app_model(model_); !problems.empty()) {
    const auto first = problems.front();
    throw Error(ErrorCode::invariant_violation, first, std::move(problems));
  }
  clear_session();
}

void Simulator::clear_session() {
  page_ = model_.start_page;
  state_.clear();
  for (const auto& [id, page] : model_.pages) {
    auto& states = state_[id];
    for (const auto& e : page.elements) {
      states[e.xpath] = ElementState{e.text.value_or(""), e.checked.value_or(false)};
    }
    for (const auto& [xpath, s] : page.state) states[xpath] = s;
  }
  focus_.reset();
  actions_ = 0;
  active_popup_.reset();
  fired_popups_.clear();
}

const std::string& Simulator::visible_page() const {
  return active_popup_ ? model_.popups[*active_popup_].popup_page : page_;
}

UiSnapshot Simulator::snapshot_of(const std::string& page_id) const {
  const auto& page = model_.pages.at(page_id);
  const auto& states = state_.at(page_id);
  std::vector<UiElement> elements = page.elements;
  for (auto& e : elements) {
    const auto& s = states.at(e.xpath);
    if (!s.text.empty()) {
      e.text = s.text;
    } else if (e.text) {
      e.text = std::string();
    }
    if (e.checked) e.checked = s.checked;
  }
  return make_snapshot(std::move(elements));
}

UiSnapshot Simulator::snapshot() { return snapshot_of(visible_page()); }

std::optional<std::string> Simulator::pending_popup_dismissal() const {
  if (!active_popup_) return std::nullopt;
  return model_.popups[*active_popup_].dismiss_xpath;
}

bool Simulator::guard_holds(const std::string& page_id, const std::optional<GuardExpr>& guard) const {
  if (!guard) return true;
  const auto& states = state_.at(page_id);
  for (const auto& c : guard->conjuncts) {
    const auto& s = states.at(c.xpath);
    switch (c.predicate) {
      case GuardPredicate::checked:
        if (!s.checked) return false;
        break;
      case GuardPredicate::text_nonempty:
        if (s.text.empty()) return false;
        break;
      case GuardPredicate::text_equals:
        if (s.text != c.value) return false;
        break;
    }
  }
  return true;
}

bool Simulator::fire(const std::string& xpath, OperationType kind, bool& matched) {
  matched = false;
  const std::string from = visible_page();
  for (const auto& t : model_.transitions) {
    if (t.from != from || t.on.action_kind != kind || t.on.element_xpath != xpath) continue;
    matched = true;
    if (!guard_holds(from, t.guard)) continue;
    page_ = t.to;
    active_popup_.reset();
    focus_.reset();
    return true;
  }
  return false;
}

OutcomeStatus Simulator::finish(OutcomeStatus status) {
  if (active_popup_) return status;
  for (std::size_t i = 0; i < model_.popups.size(); ++i) {
    const auto& p = model_.popups[i];
    if (fired_popups_.contains(i) || p.trigger_page != page_) continue;
    if (actions_ < static_cast<std::size_t>(p.after_round)) continue;
    active_popup_ = i;
    fired_popups_.insert(i);
    focus_.reset();
    return OutcomeStatus::popup_appeared;
  }
  return status;
}

ActionOutcome Simulator::outcome(OutcomeStatus status, bool implicit_focus) {
  return ActionOutcome{status, snapshot(), implicit_focus};
}

ActionOutcome Simulator::perform(const Action& action) {
  if (auto err = validate_action(action)) {
    throw Error(ErrorCode::precondition, "invalid action: " + std::string(to_string(*err)));
  }
  const std::string page_id = visible_page();
  const UiElement* element = nullptr;
  if (!action.element_xpath.empty()) {
    for (const auto& e : model_.pages.at(page_id).elements) {
      if (e.xpath == action.element_xpath) element = &e;
    }
    if (element == nullptr) return outcome(OutcomeStatus::element_not_found);
  }
  ++actions_;

  bool matched = false;
  switch (action.operation_type) {
    case OperationType::click: {
      if (active_popup_ && action.element_xpath == model_.popups[*active_popup_].dismiss_xpath) {
        active_popup_.reset();
        return outcome(finish(OutcomeStatus::ok));
      }
      bool changed = false;
      if (element->editable && focus_ != action.element_xpath) {
        focus_ = action.element_xpath;
        changed = true;
      }
      if (element->checked) {
        auto& s = state_[page_id][action.element_xpath];
        s.checked = !s.checked;
        changed = true;
      }
      const bool navigated = fire(action.element_xpath, OperationType::click, matched);
      return outcome(finish(navigated || changed ? OutcomeStatus::ok : OutcomeStatus::no_effect));
    }
    case OperationType::input: {
      if (!element->editable) return outcome(finish(OutcomeStatus::no_effect));
      bool implicit_focus = false;
      if (focus_ != action.element_xpath) {
        focus_ = action.element_xpath;
        implicit_focus = true;
      }
      state_[page_id][action.element_xpath].text = action.operation_text;
      fire(action.element_xpath, OperationType::input, matched);
      return outcome(finish(OutcomeStatus::ok), implicit_focus);
    }
    case OperationType::drag: {
      const bool navigated = fire(action.element_xpath, OperationType::drag, matched);
      return outcome(finish(navigated ? OutcomeStatus::ok : OutcomeStatus::no_effect));
    }
  }
  return outcome(OutcomeStatus::no_effect);
}

ActionOutcome Simulator::send_keys(const std::string& xpath, const std::string& text) {
  const std::string page_id = visible_page();
  const UiElement* element = nullptr;
  for (const auto& e : model_.pages.at(page_id).elements) {
    if (e.xpath == xpath) element = &e;
  }
  if (element == nullptr) return outcome(OutcomeStatus::element_not_found);
  ++actions_;
  if (!element->editable || focus_ != xpath) return outcome(finish(OutcomeStatus::no_effect));
  state_[page_id][xpath].text = text;
  bool matched = false;
  fire(xpath, OperationType::input, matched);
  return outcome(finish(OutcomeStatus::ok));
}

void Simulator::reset(const DeviceConfig& cfg) {
  // no_reset keeps the session as it is; full_reset and the default (neither
  // flag) both return to a clean start since the simulator has no install step.
  if (cfg.no_reset && !cfg.full_reset) return;
  clear_session();
}

}  // namespace guiscript
