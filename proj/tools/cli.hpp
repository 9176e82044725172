#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace interfere::cli {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
  kSuccess = 0,
  kInternal = 1,
  kValidation = 2,
  kEstimation = 3,
  kUsage = 64,
};

/// Runs one invocation. `args` excludes the program name. Reports go to
/// `out` unless --out names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace interfere::cli
