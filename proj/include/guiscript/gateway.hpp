#pragma once

// Chat-completion gateway with interchangeable backends.
//
//   live     - OpenAI-compatible HTTP endpoint
//   record   - live, and every reply is appended to a JSON-lines fixture file
//   replay   - fixtures only; the Nth call returns fixture N
//   scripted - replies come from an injected deterministic policy
//
// A Gateway serves one session sequentially: replay matches fixtures by call
// ordinal, so calls must arrive in the same order they were recorded.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "guiscript/model.hpp"

namespace guiscript {

enum class GatewayMode { live, record, replay, scripted };

std::string_view to_string(GatewayMode mode);
std::optional<GatewayMode> parse_gateway_mode(std::string_view text);

struct GatewayConfig {
  GatewayMode mode = GatewayMode::replay;
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string model_name = "gpt-3.5-turbo";
  std::string api_key_env_var = "OPENAI_API_KEY";
  std::filesystem::path fixture_path;
  int request_timeout_ms = 60000;
  int max_retries = 3;
  double temperature = 0.0;
};

// Throws Error(validation) naming the offending field.
void validate_gateway_config(const GatewayConfig& cfg);

struct Fixture {
  std::int64_t ordinal = 0;
  std::string prompt_digest;
  std::string reply;

  bool operator==(const Fixture&) const = default;
};

void to_json(json& j, const Fixture& v);
void from_json(const json& j, Fixture& v);

// Reads a fixture file; ordinals must run 0, 1, 2, ... in file order.
std::vector<Fixture> load_fixtures(const std::filesystem::path& path);

// Digest of the serialized message list (token_estimate excluded).
std::string transcript_digest(const ChatTranscript& transcript);

std::int64_t estimate_tokens(const ChatTranscript& transcript);

struct HttpRequest {
  std::string method = "POST";
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  int timeout_ms = 60000;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Minimal HTTP seam shared by the gateway and the WebDriver client. send()
// throws Error(transport_error) when no response was received and
// Error(timeout) when the request timed out.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

// cpp-httplib backed transport. Accepts http:// and https:// URLs.
class HttpTransport final : public Transport {
 public:
  HttpResponse send(const HttpRequest& request) override;
};

// Chooses the next reply in scripted mode. `call_index` counts from 0.
using ScriptedPolicy = std::function<std::string(const ChatTranscript&, std::size_t call_index)>;

// Replies returned in order; once exhausted the last reply repeats.
ScriptedPolicy scripted_replies(std::vector<std::string> replies);

struct GatewayHooks {
  // Required for live/record; replay and scripted never touch it.
  std::shared_ptr<Transport> transport;
  ScriptedPolicy policy;
  std::function<void(std::chrono::milliseconds)> sleep;
  std::function<std::optional<std::string>(const std::string&)> getenv;
};

class Gateway {
 public:
  explicit Gateway(GatewayConfig cfg, GatewayHooks hooks = {});

  // Preconditions: at least one message, last message from the user.
  std::string complete(const ChatTranscript& transcript);

  const GatewayConfig& config() const noexcept { return cfg_; }
  std::size_t calls() const noexcept { return calls_; }
  // Replay calls whose prompt digest differed from the recorded one.
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  std::string complete_live(const ChatTranscript& transcript);
  std::string complete_replay(const ChatTranscript& transcript);
  void append_fixture(const Fixture& fixture);
  const std::string& api_key();

  GatewayConfig cfg_;
  GatewayHooks hooks_;
  std::size_t calls_ = 0;
  std::optional<std::vector<Fixture>> fixtures_;
  std::optional<std::string> api_key_;
  bool fixture_file_started_ = false;
  std::vector<std::string> warnings_;
};

// Request body for an OpenAI-compatible chat-completions call.
json chat_request_body(const ChatTranscript& transcript, const GatewayConfig& cfg);
// Assistant text from a chat-completions response body.
std::string chat_reply_text(const std::string& response_body);

}  // namespace guiscript
