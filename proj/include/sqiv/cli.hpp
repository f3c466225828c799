#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sqiv/error.hpp"

namespace sqiv {

/// Process exit codes of the `sqiv` tool.
enum ExitCode : int {
  exit_ok = 0,
  exit_internal = 1,    // unexpected failure (a bug)
  exit_config = 2,      // bad flags, config file or column mapping
  exit_parse = 3,       // input data missing, unreadable or malformed
  exit_estimation = 4,  // solver, numerical or identification failure
  exit_io = 5,          // output could not be written
};

int exit_code_for(ErrorKind kind);

/// Parses "0.1,0.5", "0.1..0.9" (step 0.1) or "0.05..0.95:0.05" into a list
/// of quantile levels in (0, 1). Throws ConfigError naming `field`.
std::vector<double> parse_tau_list(const std::vector<std::string>& items, const std::string& field);

/// Entry point of the command-line tool. Subcommands: estimate, simulate,
/// euler. A TOML config file may be given with --config or the SQIV_CONFIG
/// environment variable; flags override file values. Output files are written
/// only when the whole run succeeds.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sqiv
