#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace thc::cli {

inline constexpr const char* kToolVersion = "thc 0.1.0";

enum ExitCode { kOk = 0, kMismatch = 1, kUsage = 2, kInternal = 3 };

/// Runs one command line (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace thc::cli
