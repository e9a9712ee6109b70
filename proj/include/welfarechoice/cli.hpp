#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace welfarechoice {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitViolation = 1, kExitInput = 2, kExitNumeric = 3 };

/// Runs the command line `args` (without the program name). Output that is
/// not redirected with --out goes to `out`; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace welfarechoice
