#include "guiscript/explorer.hpp"

#include <algorithm>
#include <sstream>

#include "guiscript/error.hpp"
#include "guiscript/prompts.hpp"

namespace guiscript {

namespace {

// Engine-dismissed pop-ups per round; a model that keeps re-opening them is
// not the engine's problem to loop on forever.
constexpr int kMaxDismissalsPerRound = 8;

struct Unit {
  std::vector<ChatMessage> messages;
  bool is_round = false;  // false for the readiness reply
};

std::string condensed_line(int round_no, const Unit& unit) {
  std::string line = "Round " + std::to_string(round_no) + ": ";
  const ChatMessage* reply = nullptr;
  for (const auto& m : unit.messages) {
    if (m.role == Role::assistant) reply = &m;
  }
  if (reply == nullptr) return line + "no operation";
  const auto decision = parse_exploration_reply(reply->content);
  switch (decision.variant) {
    case Decision::Variant::act: {
      const auto& a = *decision.action;
      line += "performed " + std::string(to_string(a.operation_type)) + " on " +
              (a.element_xpath.empty() ? std::string("the screen") : a.element_xpath);
      if (a.operation_type == OperationType::drag) line += " (" + a.operation_text + ")";
      return line;
    }
    case Decision::Variant::done:
      return line + "reported DONE";
    case Decision::Variant::unparseable:
      break;
  }
  return line + "no operation";
}

ChatTranscript assemble(const ChatMessage& head, const std::vector<std::string>& condensed,
                        const std::vector<Unit>& units, std::size_t first_kept) {
  ChatTranscript out;
  out.append(head.role, head.content);
  if (!condensed.empty()) {
    std::string body(kCondensedHeader);
    for (const auto& line : condensed) body += "\n" + line;
    out.append(Role::user, std::move(body));
  }
  for (std::size_t i = first_kept; i < units.size(); ++i) {
    for (const auto& m : units[i].messages) out.append(m.role, m.content);
  }
  return out;
}

}  // namespace

void validate_explorer_config(const ExplorerConfig& cfg) {
  if (cfg.max_rounds <= 0) throw Error(ErrorCode::validation, "max_rounds must be positive");
  if (cfg.token_budget <= 0) throw Error(ErrorCode::validation, "token_budget must be positive");
  if (cfg.element_cap <= 0) throw Error(ErrorCode::validation, "element_cap must be positive");
  if (cfg.stagnation_limit <= 0 || cfg.stagnation_limit > cfg.max_rounds) {
    throw Error(ErrorCode::validation, "stagnation_limit must lie in [1, max_rounds]");
  }
}

std::vector<UiElement> filter_elements(const UiSnapshot& snapshot, int cap) {
  if (cap < 1) throw Error(ErrorCode::precondition, "element cap must be at least 1");
  std::vector<UiElement> editable;
  std::vector<UiElement> clickable;
  for (const auto& e : snapshot.elements) {
    if (e.editable) {
      editable.push_back(e);
    } else if (e.clickable) {
      clickable.push_back(e);
    }
  }
  const auto limit = static_cast<std::size_t>(cap);
  if (editable.size() + clickable.size() <= limit) {
    std::vector<UiElement> kept;
    for (const auto& e : snapshot.elements) {
      if (e.editable || e.clickable) kept.push_back(e);
    }
    return kept;
  }
  std::vector<UiElement> kept;
  for (auto& e : editable) {
    if (kept.size() == limit) break;
    kept.push_back(std::move(e));
  }
  for (auto& e : clickable) {
    if (kept.size() == limit) break;
    kept.push_back(std::move(e));
  }
  return kept;
}

ChatTranscript trim_transcript(const ChatTranscript& transcript, std::int64_t budget) {
  if (transcript.messages.empty()) return transcript;
  if (estimate_tokens(transcript) <= budget) return transcript;

  const ChatMessage& head = transcript.messages.front();
  std::size_t i = 1;
  std::vector<std::string> condensed;
  if (i < transcript.messages.size() && transcript.messages[i].role == Role::user &&
      std::string_view(transcript.messages[i].content).starts_with(kCondensedHeader)) {
    std::istringstream lines(transcript.messages[i].content);
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) condensed.push_back(line);
    ++i;
  }

  std::vector<Unit> units;
  for (; i < transcript.messages.size(); ++i) {
    const auto& m = transcript.messages[i];
    const bool starts_round = m.role == Role::user && m.content != prompt_text::kCorrective;
    if (starts_round || units.empty()) {
      units.push_back(Unit{{}, starts_round});
    }
    units.back().messages.push_back(m);
  }
  if (units.empty()) {
    throw Error(ErrorCode::budget_too_small, "the initiation message alone exceeds the budget");
  }

  {
    const auto minimal = assemble(head, {}, units, units.size() - 1);
    if (minimal.token_estimate > budget) {
      throw Error(ErrorCode::budget_too_small,
                  "initiation plus latest round needs " + std::to_string(minimal.token_estimate) +
                      " tokens, budget is " + std::to_string(budget));
    }
  }

  int round_no = static_cast<int>(condensed.size());
  for (std::size_t drop = 0; drop + 1 < units.size(); ++drop) {
    if (units[drop].is_round) condensed.push_back(condensed_line(++round_no, units[drop]));
    auto candidate = assemble(head, condensed, units, drop + 1);
    if (candidate.token_estimate <= budget) return candidate;
  }
  throw Error(ErrorCode::budget_too_small,
              "condensed history plus latest round does not fit in " + std::to_string(budget) +
                  " tokens");
}

ExplorationResult run_exploration(std::string_view app, std::string_view function, Driver& driver,
                                  Gateway& gateway, const ExplorerConfig& cfg) {
  validate_explorer_config(cfg);

  ExplorationResult result;
  auto& trace = result.trace;
  auto& transcript = result.transcript;
  trace.scenario_name = std::string(function);

  // Sends the trimmed transcript, or returns nullopt when it cannot fit.
  auto ask = [&]() -> std::optional<std::string> {
    ChatTranscript sent;
    try {
      sent = trim_transcript(transcript, cfg.token_budget);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::budget_too_small) return std::nullopt;
      throw;
    }
    result.peak_sent_tokens = std::max(result.peak_sent_tokens, sent.token_estimate);
    return gateway.complete(sent);
  };

  transcript = build_initiation_prompt(app, function);
  auto readiness = ask();
  if (!readiness) {
    trace.terminal = Terminal::budget_cap;
    return result;
  }
  result.readiness_reply = *readiness;
  transcript.append(Role::assistant, *readiness);
  if (readiness->find_first_not_of(" \t\r\n") == std::string::npos) {
    trace.terminal = Terminal::parse_failure;
    return result;
  }

  std::optional<Action> previous_action;
  std::optional<std::string> previous_fingerprint;
  std::optional<std::pair<std::string, Action>> last_pair;
  int repeats = 0;
  int llm_rounds = 0;

  while (true) {
    if (llm_rounds >= cfg.max_rounds) {
      trace.terminal = Terminal::round_cap;
      return result;
    }

    if (cfg.popup_policy == PopupPolicy::auto_dismiss) {
      for (int n = 0; n < kMaxDismissalsPerRound; ++n) {
        auto dismiss = driver.pending_popup_dismissal();
        if (!dismiss) break;
        auto shown = driver.snapshot();
        Action click{*dismiss, OperationType::click, ""};
        auto outcome = driver.perform(click);
        trace.rounds.push_back({std::move(shown), Decision::make_act(click), std::move(outcome),
                                Initiator::engine});
      }
    }

    auto snap = driver.snapshot();
    PageChange change = PageChange::first;
    if (previous_fingerprint) {
      change = *previous_fingerprint == snap.page_fingerprint ? PageChange::unchanged
                                                              : PageChange::new_page;
    }
    auto elements = filter_elements(snap, cfg.element_cap);
    auto message = build_exploration_prompt(previous_action, change, elements);
    while (message.size() > cfg.max_message_chars && !elements.empty()) {
      elements.pop_back();
      message = build_exploration_prompt(previous_action, change, elements);
    }

    transcript.append(Role::user, std::move(message));
    auto reply = ask();
    if (!reply) {
      trace.terminal = Terminal::budget_cap;
      return result;
    }
    transcript.append(Role::assistant, *reply);
    ++llm_rounds;

    auto decision = parse_exploration_reply(*reply);
    if (decision.variant == Decision::Variant::unparseable) {
      transcript.append(Role::user, std::string(prompt_text::kCorrective));
      auto retry = ask();
      if (!retry) {
        trace.terminal = Terminal::budget_cap;
        return result;
      }
      transcript.append(Role::assistant, *retry);
      decision = parse_exploration_reply(*retry);
    }

    switch (decision.variant) {
      case Decision::Variant::unparseable: {
        ActionOutcome none{OutcomeStatus::no_effect, snap, false};
        trace.rounds.push_back({std::move(snap), std::move(decision), std::move(none), Initiator::llm});
        trace.terminal = Terminal::parse_failure;
        return result;
      }
      case Decision::Variant::done: {
        ActionOutcome none{OutcomeStatus::ok, snap, false};
        trace.rounds.push_back({std::move(snap), std::move(decision), std::move(none), Initiator::llm});
        trace.terminal = Terminal::done;
        return result;
      }
      case Decision::Variant::act:
        break;
    }

    const Action action = *decision.action;
    auto outcome = driver.perform(action);
    const auto seen_fingerprint = snap.page_fingerprint;
    trace.rounds.push_back({std::move(snap), std::move(decision), std::move(outcome), Initiator::llm});

    if (last_pair && last_pair->first == seen_fingerprint && last_pair->second == action) {
      ++repeats;
    } else {
      last_pair = {seen_fingerprint, action};
      repeats = 1;
    }
    if (repeats >= cfg.stagnation_limit) {
      trace.terminal = Terminal::stagnation;
      return result;
    }
    previous_action = action;
    previous_fingerprint = seen_fingerprint;
  }
}

}  // namespace guiscript
