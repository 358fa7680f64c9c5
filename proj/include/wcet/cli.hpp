#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace wcet::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kNumericFailure = 3,
};

/// Runs one `wcet_cli` invocation. `args` excludes the program name.
/// Machine-readable rows go to `out`, diagnostics and summaries to `err`.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace wcet::cli
