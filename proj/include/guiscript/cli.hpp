#pragma once

// Command-line frontend. run_cli() is the whole program minus process
// plumbing, so it can be driven in-process by tests.
//
// Exit codes:
//   0  success
//   1  lint findings (lint) or replay failures (replay)
//   2  usage, config, io or schema error
//   3  gateway error
//   4  no script could be extracted from the reply
//   5  exploration ended without DONE (trace is still written)
//   6  incomplete migration spec (missing items on stderr)

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "guiscript/gateway.hpp"

namespace guiscript {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFindings = 1;
inline constexpr int kConfig = 2;
inline constexpr int kGateway = 3;
inline constexpr int kExtraction = 4;
inline constexpr int kNotDone = 5;
inline constexpr int kInvalidSpec = 6;
}  // namespace exit_code

struct CliHooks {
  // Passed to every Gateway the CLI builds (transport, sleep, getenv).
  GatewayHooks gateway;
  // Transport for --webdriver-url sessions; HttpTransport when unset.
  std::shared_ptr<Transport> webdriver_transport;
};

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const CliHooks& hooks = {});

}  // namespace guiscript
