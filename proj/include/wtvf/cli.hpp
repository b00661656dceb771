#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wtvf {

/// Stable process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitMalformed = 4,
  kExitNoConvergence = 5,
  kExitBracket = 6,
};

/// Entry point of the `wtvf` tool. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wtvf
