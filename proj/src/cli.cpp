#include "guiscript/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "guiscript/device.hpp"
#include "guiscript/error.hpp"
#include "guiscript/explorer.hpp"
#include "guiscript/prompts.hpp"
#include "guiscript/synth.hpp"

namespace guiscript {

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string gateway_mode;
  std::string fixtures;
  std::string model;
  std::optional<double> temperature;
  std::optional<std::int64_t> token_budget;
  std::optional<int> max_rounds;
  std::optional<int> element_cap;
  std::string popup_policy;
  std::string endpoint;
  std::string api_key_env;
  std::optional<int> wait_ms;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json read_json(const fs::path& path) {
  const auto text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

fs::path sibling(const fs::path& path, std::string_view suffix) {
  auto stem = path;
  stem.replace_extension();
  return fs::path(stem.string() + std::string(suffix));
}

json findings_json(const std::vector<LintFinding>& findings) {
  json j = json::array();
  for (const auto& f : findings) j.push_back(f);
  return j;
}

void print_findings(std::ostream& os, const std::vector<LintFinding>& findings) {
  for (const auto& f : findings) {
    os << "line " << f.line << ": " << f.rule << ": " << f.message << "\n";
  }
}

template <typename T>
void take(const json& file, const char* key, T& target) {
  if (file.contains(key) && !file[key].is_null()) {
    try {
      target = file[key].get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::schema_error, std::string("config field '") + key + "': " + e.what());
    }
  }
}

// A config file holds the DeviceConfig fields and, optionally, defaults for
// any global flag (snake_case). Flags given on the command line win.
struct Settings {
  DeviceConfig device;
  GatewayConfig gateway;
  ExplorerConfig explorer;
  int wait_ms = kDefaultPageWaitMs;
};

void apply_globals(const GlobalOptions& g, const json& file, Settings& s) {
  std::string mode = "replay";
  std::string fixtures;
  std::string popup = "auto";
  take(file, "gateway_mode", mode);
  take(file, "fixtures", fixtures);
  take(file, "model", s.gateway.model_name);
  take(file, "temperature", s.gateway.temperature);
  take(file, "endpoint", s.gateway.endpoint_url);
  take(file, "api_key_env", s.gateway.api_key_env_var);
  take(file, "token_budget", s.explorer.token_budget);
  take(file, "max_rounds", s.explorer.max_rounds);
  take(file, "element_cap", s.explorer.element_cap);
  take(file, "popup_policy", popup);
  take(file, "wait_ms", s.wait_ms);

  if (!g.gateway_mode.empty()) mode = g.gateway_mode;
  if (!g.fixtures.empty()) fixtures = g.fixtures;
  if (!g.model.empty()) s.gateway.model_name = g.model;
  if (g.temperature) s.gateway.temperature = *g.temperature;
  if (!g.endpoint.empty()) s.gateway.endpoint_url = g.endpoint;
  if (!g.api_key_env.empty()) s.gateway.api_key_env_var = g.api_key_env;
  if (g.token_budget) s.explorer.token_budget = *g.token_budget;
  if (g.max_rounds) s.explorer.max_rounds = *g.max_rounds;
  if (g.element_cap) s.explorer.element_cap = *g.element_cap;
  if (!g.popup_policy.empty()) popup = g.popup_policy;
  if (g.wait_ms) s.wait_ms = *g.wait_ms;

  auto parsed = parse_gateway_mode(mode);
  if (!parsed) throw Error(ErrorCode::validation, "unknown gateway mode '" + mode + "'");
  s.gateway.mode = *parsed;
  s.gateway.fixture_path = fixtures;
  if (popup == "auto") {
    s.explorer.popup_policy = PopupPolicy::auto_dismiss;
  } else if (popup == "surface") {
    s.explorer.popup_policy = PopupPolicy::surface_to_llm;
  } else {
    throw Error(ErrorCode::validation, "popup_policy must be 'auto' or 'surface'");
  }
  if (s.wait_ms < 0) throw Error(ErrorCode::validation, "wait_ms must not be negative");
  if (s.explorer.stagnation_limit > s.explorer.max_rounds) {
    s.explorer.stagnation_limit = std::max(1, s.explorer.max_rounds);
  }
}

Settings load_settings(const GlobalOptions& g, const std::string& config_path, bool needs_device) {
  Settings s;
  json file = json::object();
  if (!config_path.empty()) file = read_json(config_path);
  if (needs_device) {
    if (config_path.empty()) throw Error(ErrorCode::validation, "--config is required");
    s.device = file.get<DeviceConfig>();
    if (auto bad = validate_device_config(s.device)) {
      throw Error(ErrorCode::validation, "device config field '" + *bad + "' is invalid");
    }
  }
  apply_globals(g, file, s);
  validate_explorer_config(s.explorer);
  return s;
}

std::unique_ptr<Gateway> make_gateway(const GatewayConfig& cfg, const CliHooks& hooks) {
  GatewayHooks gh = hooks.gateway;
  if (cfg.mode == GatewayMode::scripted && !gh.policy) {
    if (cfg.fixture_path.empty()) {
      throw Error(ErrorCode::validation, "scripted mode needs --fixtures with a replies file");
    }
    const auto j = read_json(cfg.fixture_path);
    std::vector<std::string> replies;
    take(j, "replies", replies);
    if (replies.empty()) throw Error(ErrorCode::validation, "scripted replies file has no replies");
    gh.policy = scripted_replies(std::move(replies));
  }
  return std::make_unique<Gateway>(cfg, std::move(gh));
}

void report_warnings(const Gateway& gateway, std::ostream& err) {
  for (const auto& w : gateway.warnings()) err << "warning: " << w << "\n";
}

std::vector<ScenarioStepSpec> load_steps(const std::string& path) {
  const auto j = read_json(path);
  const json& list = j.is_object() && j.contains("steps") ? j["steps"] : j;
  if (!list.is_array()) throw Error(ErrorCode::schema_error, path + ": expected a list of steps");
  std::vector<ScenarioStepSpec> steps;
  for (const auto& item : list) steps.push_back(item.get<ScenarioStepSpec>());
  return steps;
}

int exit_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::transport_error:
    case ErrorCode::fixture_exhausted:
    case ErrorCode::auth_missing:
    case ErrorCode::timeout:
      return exit_code::kGateway;
    case ErrorCode::extraction_failed:
      return exit_code::kExtraction;
    case ErrorCode::invalid_spec:
      return exit_code::kInvalidSpec;
    default:
      return exit_code::kConfig;
  }
}

// ---- commands ----------------------------------------------------------------

struct GenerateArgs {
  std::string config, steps, out, lint_out;
};

int cmd_generate(const GlobalOptions& g, const GenerateArgs& a, std::ostream& out, std::ostream& err,
                 const CliHooks& hooks) {
  const auto settings = load_settings(g, a.config, true);
  const auto steps = load_steps(a.steps);
  const auto prompt = build_oneshot_generation_prompt(settings.device, steps);
  auto gateway = make_gateway(settings.gateway, hooks);
  const auto reply = gateway->complete(prompt);
  report_warnings(*gateway, err);
  auto script = extract_code_block(reply);
  if (!script) throw Error(ErrorCode::extraction_failed, "the reply contains no test script");

  const auto findings = lint(*script);
  const fs::path lint_path = a.lint_out.empty() ? sibling(a.out, ".lint.json") : fs::path(a.lint_out);
  write_file(a.out, *script);
  write_file(lint_path, findings_json(findings).dump(2) + "\n");
  out << "script: " << a.out << "\nlint report: " << lint_path.string() << " (" << findings.size()
      << " finding" << (findings.size() == 1 ? "" : "s") << ")\n";
  print_findings(err, findings);
  return exit_code::kOk;
}

struct ExploreArgs {
  std::string config, app_model, webdriver_url, app, function;
  std::string out_trace, out_script, out_ir, out_lint;
};

int cmd_explore(const GlobalOptions& g, const ExploreArgs& a, std::ostream& out, std::ostream& err,
                const CliHooks& hooks) {
  if (a.app_model.empty() == a.webdriver_url.empty()) {
    err << "error: give exactly one of --app-model and --webdriver-url\n";
    return exit_code::kConfig;
  }
  const auto settings = load_settings(g, a.config, true);

  std::unique_ptr<Driver> driver;
  if (!a.app_model.empty()) {
    auto sim = std::make_unique<Simulator>(load_app_model(a.app_model));
    sim->reset(settings.device);
    driver = std::move(sim);
  } else {
    auto client = std::make_unique<WebDriverClient>(a.webdriver_url, settings.device,
                                                    hooks.webdriver_transport);
    client->start();
    driver = std::move(client);
  }
  auto gateway = make_gateway(settings.gateway, hooks);

  auto result = run_exploration(a.app, a.function, *driver, *gateway, settings.explorer);
  const auto& trace = result.trace;
  report_warnings(*gateway, err);
  write_file(a.out_trace, trace_to_jsonl(trace));
  out << "terminal: " << to_string(trace.terminal) << " after " << trace.llm_round_count()
      << " dialogue rounds\ntrace: " << a.out_trace << "\n";
  if (trace.terminal != Terminal::done) {
    err << "exploration ended with '" << to_string(trace.terminal) << "'\n";
    return exit_code::kNotDone;
  }

  TestScript ir;
  try {
    ir = synthesize_from_trace(trace, settings.device, SynthOptions{settings.wait_ms});
  } catch (const Error& e) {
    if (e.code() != ErrorCode::trace_not_done) throw;
    err << "exploration reported DONE without any effective action\n";
    return exit_code::kNotDone;
  }

  std::string script;
  const auto warned = gateway->warnings().size();
  auto llm = synthesize_via_llm(result.transcript, *gateway, settings.explorer.token_budget);
  for (std::size_t i = warned; i < gateway->warnings().size(); ++i) {
    err << "warning: " << gateway->warnings()[i] << "\n";
  }
  if (llm) {
    const auto llm_findings = lint(*llm);
    if (llm_findings.empty()) {
      script = std::move(*llm);
    } else {
      err << "model script has " << llm_findings.size()
          << " lint finding(s); using the script rendered from the trace\n";
      print_findings(err, llm_findings);
    }
  } else {
    err << "no script in the summarization reply; using the script rendered from the trace\n";
  }
  if (script.empty()) script = render(ir);

  const auto findings = lint(script);
  const fs::path ir_path = a.out_ir.empty() ? sibling(a.out_script, ".ir.json") : fs::path(a.out_ir);
  const fs::path lint_path =
      a.out_lint.empty() ? sibling(a.out_script, ".lint.json") : fs::path(a.out_lint);
  write_file(ir_path, json(ir).dump(2) + "\n");
  write_file(a.out_script, script);
  write_file(lint_path, findings_json(findings).dump(2) + "\n");
  out << "ir: " << ir_path.string() << "\nscript: " << a.out_script << "\nlint report: "
      << lint_path.string() << " (" << findings.size() << " finding"
      << (findings.size() == 1 ? "" : "s") << ")\n";
  return exit_code::kOk;
}

struct MigrateArgs {
  std::string kind, spec, out;
};

int cmd_migrate(const GlobalOptions& g, const MigrateArgs& a, std::ostream& out, std::ostream& err,
                const CliHooks& hooks) {
  auto j = read_json(a.spec);
  if (!a.kind.empty()) {
    if (!j.is_object()) throw Error(ErrorCode::schema_error, a.spec + ": expected an object");
    j["kind"] = a.kind;
  }
  MigrationSpec spec = j.get<MigrationSpec>();

  if (auto missing = validate_migration_spec(spec); !missing.empty()) {
    err << "incomplete migration spec; missing:\n";
    for (const auto& m : missing) err << "  " << m << "\n";
    return exit_code::kInvalidSpec;
  }
  const auto settings = load_settings(g, "", false);
  auto gateway = make_gateway(settings.gateway, hooks);
  const auto report = migrate(spec, *gateway);
  report_warnings(*gateway, err);
  write_file(a.out, json(report).dump(2) + "\n");
  out << "report: " << a.out << "\nchanged lines: " << report.changed_line_count << "\n";
  if (report.unchanged) err << "warning: the model returned the old script unchanged\n";
  print_findings(err, report.findings);
  return exit_code::kOk;
}

int cmd_lint(const std::string& path, std::ostream& out) {
  const auto findings = lint(read_file(path));
  print_findings(out, findings);
  if (findings.empty()) out << "clean\n";
  return findings.empty() ? exit_code::kOk : exit_code::kFindings;
}

int cmd_replay(const std::string& ir_path, const std::string& model_path, std::ostream& out) {
  const auto script = read_json(ir_path).get<TestScript>();
  Simulator sim(load_app_model(model_path));
  sim.reset(script.config);
  const auto report = replay_script(script, sim);
  out << "reached: " << report.reached_fingerprint << "\n";
  for (const auto& f : report.failures) {
    out << "step " << f.step << ": " << to_string(f.status) << ": " << f.detail << "\n";
  }
  return report.failures.empty() ? exit_code::kOk : exit_code::kFindings;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliHooks& hooks) {
  CLI::App app{"Generate, explore, migrate, lint and replay mobile GUI test scripts", "guiscript"};
  app.require_subcommand(1);

  GlobalOptions g;
  auto* globals = app.add_option_group("Global");
  globals->add_option("--gateway-mode", g.gateway_mode, "live, record, replay or scripted (default replay)")
      ->check(CLI::IsMember({"live", "record", "replay", "scripted"}));
  globals->add_option("--fixtures", g.fixtures, "Fixture file (record/replay) or replies file (scripted)");
  globals->add_option("--model", g.model, "Model name");
  globals->add_option("--temperature", g.temperature, "Sampling temperature");
  globals->add_option("--token-budget", g.token_budget, "Token budget per request");
  globals->add_option("--max-rounds", g.max_rounds, "Dialogue round cap");
  globals->add_option("--element-cap", g.element_cap, "Elements listed per page");
  globals->add_option("--popup-policy", g.popup_policy, "auto or surface")
      ->check(CLI::IsMember({"auto", "surface"}));
  globals->add_option("--endpoint", g.endpoint, "Chat-completions endpoint URL");
  globals->add_option("--api-key-env", g.api_key_env, "Environment variable holding the API key");
  globals->add_option("--wait-ms", g.wait_ms, "Wait inserted after page changes");

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "One-shot generation from a scenario description");
  generate->fallthrough();
  generate->add_option("--config", gen.config, "Device config JSON")->required();
  generate->add_option("--steps", gen.steps, "Scenario steps JSON")->required();
  generate->add_option("--out", gen.out, "Script output path")->required();
  generate->add_option("--lint-out", gen.lint_out, "Lint report path");

  ExploreArgs exp;
  auto* explore = app.add_subcommand("explore", "Dialogue-driven exploration and synthesis");
  explore->fallthrough();
  explore->add_option("--config", exp.config, "Device config JSON")->required();
  explore->add_option("--app-model", exp.app_model, "Simulator app model JSON");
  explore->add_option("--webdriver-url", exp.webdriver_url, "Appium server URL");
  explore->add_option("--app", exp.app, "App name")->required();
  explore->add_option("--function", exp.function, "Function to test")->required();
  explore->add_option("--out-trace", exp.out_trace, "Trace output (JSON lines)")->required();
  explore->add_option("--out-script", exp.out_script, "Script output path")->required();
  explore->add_option("--out-ir", exp.out_ir, "Script IR output path");
  explore->add_option("--out-lint", exp.out_lint, "Lint report path");

  MigrateArgs mig;
  auto* migrate_cmd = app.add_subcommand("migrate", "Migrate a script to another device or app");
  migrate_cmd->fallthrough();
  migrate_cmd->add_option("--kind", mig.kind, "cross_platform or cross_app (overrides the spec)")
      ->check(CLI::IsMember({"cross_platform", "cross_app"}));
  migrate_cmd->add_option("--spec", mig.spec, "Migration spec JSON")->required();
  migrate_cmd->add_option("--out", mig.out, "Report output path")->required();

  std::string lint_path;
  auto* lint_cmd = app.add_subcommand("lint", "Lint a test script");
  lint_cmd->add_option("script", lint_path, "Script file")->required();

  std::string ir_path, model_path;
  auto* replay = app.add_subcommand("replay", "Replay a script IR on the simulator");
  replay->add_option("--ir", ir_path, "Script IR JSON")->required();
  replay->add_option("--app-model", model_path, "Simulator app model JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_code::kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kConfig;
  }

  try {
    if (*generate) return cmd_generate(g, gen, out, err, hooks);
    if (*explore) return cmd_explore(g, exp, out, err, hooks);
    if (*migrate_cmd) return cmd_migrate(g, mig, out, err, hooks);
    if (*lint_cmd) return cmd_lint(lint_path, out);
    if (*replay) return cmd_replay(ir_path, model_path, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    for (const auto& d : e.details()) err << "  " << d << "\n";
    return exit_for(e);
  } catch (const json::exception& e) {
    err << "error: schema-error: " << e.what() << "\n";
    return exit_code::kConfig;
  }
  return exit_code::kConfig;
}

}  // namespace guiscript
