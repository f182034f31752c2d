#pragma once

// Prompt builders for the three workflows (one-shot generation, dialogue
// exploration, migration) and parsers for the model's replies.
//
// Every builder is a pure function of its arguments.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "guiscript/model.hpp"

namespace guiscript {

struct ScenarioStepSpec {
  std::string page_label;
  // Full sentence, e.g. `Click the "Login" button`. A `{input}` placeholder is
  // replaced by input_text.
  std::string narration;
  std::optional<Locator> locator;
  std::optional<std::string> input_text;

  bool operator==(const ScenarioStepSpec&) const = default;
};

void to_json(json& j, const ScenarioStepSpec& v);
void from_json(const json& j, ScenarioStepSpec& v);

enum class PageChange { first, new_page, unchanged };

namespace prompt_text {
inline constexpr std::string_view kOneShotClosing =
    "Use the above information to generate a Python test script executable on the device. "
    "Ensure to set a wait time where loading is required.";
inline constexpr std::string_view kNewPage = "Now we are in a new page.";
inline constexpr std::string_view kPageUnchanged = "The page remains unchanged.";
inline constexpr std::string_view kSummarization = "Generate Appium test script for the testing process.";
inline constexpr std::string_view kMigrationClosing = "Please return the new test script.";
// Sent once when a reply could not be parsed.
inline constexpr std::string_view kCorrective =
    "Your previous reply could not be used. Either say \"DONE\" if the function has been tested, "
    "or describe exactly one operation as a JSON object with the keys \"element-xpath\", "
    "\"operation-type\" (one of \"click\", \"input\", \"drag\") and \"operation-text\".";
}  // namespace prompt_text

// Attribute values longer than this are clipped in exploration prompts.
inline constexpr std::size_t kMaxAttributeChars = 120;

// Throws Error(empty_steps) when steps is empty.
ChatTranscript build_oneshot_generation_prompt(const DeviceConfig& cfg,
                                               const std::vector<ScenarioStepSpec>& steps);

// Throws Error(empty_arg) when either name is empty.
ChatTranscript build_initiation_prompt(std::string_view app_name, std::string_view function_name);

// Throws Error(precondition) unless prev is absent exactly when change == first.
std::string build_exploration_prompt(const std::optional<Action>& prev, PageChange change,
                                     const std::vector<UiElement>& elements);

// One compact line describing an element, as used in exploration prompts.
std::string serialize_element(const UiElement& element);

std::string build_summarization_prompt();

// Both throw Error(wrong_kind) for the other migration kind and
// Error(invalid_spec) (details = missing items) for an incomplete spec.
ChatTranscript build_crossplatform_prompt(const MigrationSpec& spec);
ChatTranscript build_crossapp_prompt(const MigrationSpec& spec);

// DONE (standalone, case-sensitive) wins over any JSON action in the reply.
Decision parse_exploration_reply(std::string_view raw);

// First fenced code block, else the longest code-looking run of lines.
std::optional<std::string> extract_code_block(std::string_view raw);

// True when `text` contains `word` delimited by non-identifier characters.
bool contains_word(std::string_view text, std::string_view word);

}  // namespace guiscript
