#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace slidelm::cli {

/// Exit codes of the `slidelm` binary.
enum ExitCode : int { kOk = 0, kFailure = 1, kBadConfig = 2, kMissingInput = 3 };

/// Runs one invocation. `args` excludes the program name. Errors are reported
/// on `err` as a single JSON line {"status":"error","code","kind","key","message"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace slidelm::cli
