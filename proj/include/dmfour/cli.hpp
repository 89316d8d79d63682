#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dmfour {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,   ///< bad flags or configuration
    kExitData = 2,    ///< missing, unreadable or inconsistent inputs
    kExitNumeric = 3, ///< non-finite values during training or inference
};

/// Runs one subcommand. `args` excludes the program name. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace dmfour
