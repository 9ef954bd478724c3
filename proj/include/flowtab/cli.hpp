#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flowtab {

/// Exit codes returned by run_cli.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitValidation = 2, kExitConsistency = 3 };

/// Runs the command line `args` (args[0] is the program name). A `--config
/// file.json` argument is expanded into flags appended after the others, so
/// its values win over flags given on the command line.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace flowtab
