#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ujudge::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kBackendFatal = 3 };

/// Runs one `ujudge` invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ujudge::cli
