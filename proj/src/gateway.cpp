#include "guiscript/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "guiscript/error.hpp"

namespace guiscript {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/'
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::transport_error, "malformed URL '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

std::string excerpt(const std::string& body) {
  constexpr std::size_t kMax = 200;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

}  // namespace

std::string_view to_string(GatewayMode mode) {
  switch (mode) {
    case GatewayMode::live: return "live";
    case GatewayMode::record: return "record";
    case GatewayMode::replay: return "replay";
    case GatewayMode::scripted: return "scripted";
  }
  return "replay";
}

std::optional<GatewayMode> parse_gateway_mode(std::string_view text) {
  for (auto m : {GatewayMode::live, GatewayMode::record, GatewayMode::replay, GatewayMode::scripted}) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

void validate_gateway_config(const GatewayConfig& cfg) {
  const bool networked = cfg.mode == GatewayMode::live || cfg.mode == GatewayMode::record;
  if (networked && cfg.endpoint_url.empty()) {
    throw Error(ErrorCode::validation, "endpoint_url is required in live/record mode");
  }
  if ((cfg.mode == GatewayMode::record || cfg.mode == GatewayMode::replay) &&
      cfg.fixture_path.empty()) {
    throw Error(ErrorCode::validation, "fixture_path is required in record/replay mode");
  }
  if (cfg.request_timeout_ms <= 0) throw Error(ErrorCode::validation, "request_timeout_ms");
  if (cfg.max_retries < 0) throw Error(ErrorCode::validation, "max_retries");
  if (cfg.temperature < 0.0 || cfg.temperature > 2.0) {
    throw Error(ErrorCode::validation, "temperature must lie in [0, 2]");
  }
}

void to_json(json& j, const Fixture& v) {
  j = json{{"ordinal", v.ordinal}, {"prompt_digest", v.prompt_digest}, {"reply", v.reply}};
}

void from_json(const json& j, Fixture& v) {
  try {
    v.ordinal = j.at("ordinal").get<std::int64_t>();
    v.prompt_digest = j.value("prompt_digest", "");
    v.reply = j.at("reply").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema_error, std::string("fixture: ") + e.what());
  }
}

std::vector<Fixture> load_fixtures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open fixture file " + path.string());
  std::vector<Fixture> fixtures;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Fixture f;
    try {
      f = json::parse(line).get<Fixture>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::schema_error,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (f.ordinal != static_cast<std::int64_t>(fixtures.size())) {
      throw Error(ErrorCode::schema_error, path.string() + ":" + std::to_string(line_no) +
                                               ": expected ordinal " +
                                               std::to_string(fixtures.size()));
    }
    fixtures.push_back(std::move(f));
  }
  return fixtures;
}

std::string transcript_digest(const ChatTranscript& transcript) {
  return sha256_hex(json(transcript.messages).dump());
}

std::int64_t estimate_tokens(const ChatTranscript& transcript) {
  std::int64_t total = 0;
  for (const auto& m : transcript.messages) total += estimate_message_tokens(m.content);
  return total;
}

HttpResponse HttpTransport::send(const HttpRequest& request) {
  const auto url = split_url(request.url);
  httplib::Client client(url.origin);
  const auto timeout = std::chrono::milliseconds(request.timeout_ms);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                (request.timeout_ms % 1000) * 1000);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);

  const auto started = std::chrono::steady_clock::now();
  httplib::Result result;
  if (request.method == "GET") {
    result = client.Get(url.path, headers);
  } else if (request.method == "DELETE") {
    result = client.Delete(url.path, headers);
  } else {
    result = client.Post(url.path, headers, request.body, "application/json");
  }
  if (!result) {
    const auto err = result.error();
    const auto message = request.method + " " + request.url + ": " + httplib::to_string(err);
    // A read that ran into the deadline reports as a plain read error.
    const bool expired = std::chrono::steady_clock::now() - started >= timeout;
    if (err == httplib::Error::ConnectionTimeout || (err == httplib::Error::Read && expired)) {
      throw Error(ErrorCode::timeout, message);
    }
    throw Error(ErrorCode::transport_error, message);
  }
  return {result->status, result->body};
}

ScriptedPolicy scripted_replies(std::vector<std::string> replies) {
  return [replies = std::move(replies)](const ChatTranscript&, std::size_t call) -> std::string {
    if (replies.empty()) throw Error(ErrorCode::fixture_exhausted, "scripted policy has no replies");
    return replies[std::min(call, replies.size() - 1)];
  };
}

json chat_request_body(const ChatTranscript& transcript, const GatewayConfig& cfg) {
  json messages = json::array();
  for (const auto& m : transcript.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  return json{{"model", cfg.model_name}, {"messages", messages}, {"temperature", cfg.temperature}};
}

std::string chat_reply_text(const std::string& response_body) {
  try {
    const auto j = json::parse(response_body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::transport_error,
                std::string("unexpected chat-completions response: ") + e.what());
  }
}

Gateway::Gateway(GatewayConfig cfg, GatewayHooks hooks) : cfg_(std::move(cfg)), hooks_(std::move(hooks)) {
  validate_gateway_config(cfg_);
  if (!hooks_.sleep) {
    hooks_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  if (!hooks_.getenv) {
    hooks_.getenv = [](const std::string& name) -> std::optional<std::string> {
      const char* value = std::getenv(name.c_str());
      if (value == nullptr || *value == '\0') return std::nullopt;
      return std::string(value);
    };
  }
}

std::string Gateway::complete(const ChatTranscript& transcript) {
  if (transcript.messages.empty() || transcript.messages.back().role != Role::user) {
    throw Error(ErrorCode::precondition, "transcript must end with a user message");
  }
  std::string reply;
  switch (cfg_.mode) {
    case GatewayMode::live:
      reply = complete_live(transcript);
      break;
    case GatewayMode::record:
      reply = complete_live(transcript);
      append_fixture({static_cast<std::int64_t>(calls_), transcript_digest(transcript), reply});
      break;
    case GatewayMode::replay:
      reply = complete_replay(transcript);
      break;
    case GatewayMode::scripted:
      if (!hooks_.policy) throw Error(ErrorCode::validation, "scripted mode needs a policy");
      reply = hooks_.policy(transcript, calls_);
      break;
  }
  ++calls_;
  return reply;
}

const std::string& Gateway::api_key() {
  if (!api_key_) {
    auto key = hooks_.getenv(cfg_.api_key_env_var);
    if (!key) {
      throw Error(ErrorCode::auth_missing,
                  "environment variable " + cfg_.api_key_env_var + " is not set");
    }
    api_key_ = std::move(key);
  }
  return *api_key_;
}

std::string Gateway::complete_live(const ChatTranscript& transcript) {
  if (!hooks_.transport) hooks_.transport = std::make_shared<HttpTransport>();
  HttpRequest request;
  request.method = "POST";
  request.url = cfg_.endpoint_url;
  request.timeout_ms = cfg_.request_timeout_ms;
  request.headers = {{"Authorization", "Bearer " + api_key()},
                     {"Content-Type", "application/json"}};
  request.body = chat_request_body(transcript, cfg_).dump();

  auto backoff = std::chrono::milliseconds(500);
  for (int attempt = 0;; ++attempt) {
    const bool last = attempt >= cfg_.max_retries;
    std::optional<HttpResponse> response;
    try {
      response = hooks_.transport->send(request);
    } catch (const Error&) {
      if (last) throw;
    }
    if (response) {
      if (response->status >= 200 && response->status < 300) {
        return chat_reply_text(response->body);
      }
      if (!retryable_status(response->status) || last) {
        throw Error(ErrorCode::transport_error, "HTTP " + std::to_string(response->status) +
                                                    ": " + excerpt(response->body));
      }
    }
    hooks_.sleep(backoff);
    backoff *= 2;
  }
}

std::string Gateway::complete_replay(const ChatTranscript& transcript) {
  if (!fixtures_) fixtures_ = load_fixtures(cfg_.fixture_path);
  if (calls_ >= fixtures_->size()) {
    throw Error(ErrorCode::fixture_exhausted,
                "call " + std::to_string(calls_) + " but only " +
                    std::to_string(fixtures_->size()) + " fixtures in " +
                    cfg_.fixture_path.string());
  }
  const auto& fixture = (*fixtures_)[calls_];
  const auto digest = transcript_digest(transcript);
  if (!fixture.prompt_digest.empty() && fixture.prompt_digest != digest) {
    warnings_.push_back("fixture " + std::to_string(fixture.ordinal) +
                        ": prompt digest differs from the recorded one");
  }
  return fixture.reply;
}

void Gateway::append_fixture(const Fixture& fixture) {
  const auto mode = fixture_file_started_ ? std::ios::app : std::ios::trunc;
  if (cfg_.fixture_path.has_parent_path()) {
    std::filesystem::create_directories(cfg_.fixture_path.parent_path());
  }
  std::ofstream out(cfg_.fixture_path, std::ios::out | mode);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + cfg_.fixture_path.string());
  out << json(fixture).dump() << '\n';
  fixture_file_started_ = true;
}

}  // namespace guiscript
