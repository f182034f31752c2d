#pragma once

// The exploration dialogue: initiation, then one snapshot -> prompt -> reply
// -> action cycle per round until the model says DONE or a cap trips.

#include <cstdint>
#include <string_view>
#include <vector>

#include "guiscript/device.hpp"
#include "guiscript/gateway.hpp"
#include "guiscript/model.hpp"

namespace guiscript {

enum class PopupPolicy { auto_dismiss, surface_to_llm };

struct ExplorerConfig {
  int max_rounds = 20;
  std::int64_t token_budget = 3500;
  int element_cap = 25;
  int stagnation_limit = 3;
  PopupPolicy popup_policy = PopupPolicy::auto_dismiss;
  // Upper bound on a single exploration message; trailing elements are
  // dropped until the message fits.
  std::size_t max_message_chars = 6000;
};

// Throws Error(validation) naming the offending field.
void validate_explorer_config(const ExplorerConfig& cfg);

// Interactive elements only (clickable or editable). Over the cap, editable
// elements come first, then clickable-only ones, each in document order.
std::vector<UiElement> filter_elements(const UiSnapshot& snapshot, int cap);

// Prefix of the engine-authored message that stands in for dropped rounds.
inline constexpr std::string_view kCondensedHeader = "Earlier rounds (condensed):";

// Keeps the first (initiation) message and the most recent rounds; older
// rounds are dropped whole and each replaced by a "Round k: performed <type>
// on <xpath>" line. Throws Error(budget_too_small) when even the initiation
// plus the latest round does not fit.
ChatTranscript trim_transcript(const ChatTranscript& transcript, std::int64_t budget);

struct ExplorationResult {
  ExplorationTrace trace;
  // Full, untrimmed dialogue.
  ChatTranscript transcript;
  // Readiness reply to the initiation prompt.
  std::string readiness_reply;
  // Largest token estimate of any transcript handed to the gateway.
  std::int64_t peak_sent_tokens = 0;
};

ExplorationResult run_exploration(std::string_view app, std::string_view function, Driver& driver,
                                  Gateway& gateway, const ExplorerConfig& cfg);

}  // namespace guiscript
