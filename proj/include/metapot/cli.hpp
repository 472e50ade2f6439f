#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace metapot::cli {

/// Exit codes: 0 success, 1 validation or check failure, 2 usage or parse error.
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kUsage = 2;

/// Runs the command line (args excludes the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace metapot::cli
