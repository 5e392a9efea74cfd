#pragma once

#include <string>
#include <vector>

#include "wasscc/config.hpp"

namespace wasscc {

enum class Command { kCoeff, kWatershed, kPortfolio, kEnvelope, kSolvePp, kCertify };

// Maps the CLI subcommand word; throws on anything unknown.
Command parse_command(const std::string& word);

struct RunConfig {
  Command command;
  std::string instance_path;               // config file
  std::string output_path;                 // primary artifact
  std::vector<std::string> overrides;      // section.key=value
};

// Executes one command end to end: parse + validate the config file, apply
// overrides, run the engine, write the artifact and its `.meta` sidecar.
// Exit codes: 0 success, 1 usage/config errors, 2 infeasibility verdicts.
// Diagnostics go to `log` (stderr in the binary, a capture buffer in tests).
int run(const RunConfig& rc, std::string& log);

}  // namespace wasscc
