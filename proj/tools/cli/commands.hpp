#pragma once

#include <cstdint>
#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

#include "cli/config.hpp"

namespace bidomain::cli {

/// Process exit codes; CI consumes them directly.
enum ExitCode : int { kPass = 0, kRuntimeFailure = 1, kConfigError = 2, kTrustRegion = 3 };

struct GlobalOptions {
  std::string config_path;  // empty: built-in defaults
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int threads = 1;
};

struct CommandResult {
  int exit_code = kPass;
  Json report;                       // also written to disk
  std::vector<std::string> outputs;  // paths relative to the output directory
  std::string headline;              // one-line status for the terminal
};

// Each command reads its section of `config`, filling in defaults, and
// writes its outputs under options.out_dir. Validation problems surface as
// exceptions; property failures come back as exit codes.
CommandResult cmd_check_operator(Json& config, const GlobalOptions& options);
CommandResult cmd_probe(Json& config, const GlobalOptions& options);
CommandResult cmd_oracle_compare(Json& config, const GlobalOptions& options);
CommandResult cmd_simulate(Json& config, const GlobalOptions& options);
CommandResult cmd_fractional(Json& config, const GlobalOptions& options);

/// Maps an escaped exception to its exit code.
int exit_code_for(const std::exception& e);

std::string toolkit_version();

/// Full command line: parses flags, loads the config (or a run manifest),
/// runs the subcommand and writes <command>.manifest.json next to the
/// outputs. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bidomain::cli
