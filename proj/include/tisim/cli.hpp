#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tisim {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_io = 1,
    exit_invalid = 2,
    exit_no_route = 3,
    exit_infeasible = 4,
    exit_unstable = 5,
};

/// Runs one command line (without the program name). Human-readable output
/// goes to `out`, diagnostics to `err`; machine-readable tables go to the
/// files named by --out.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tisim
