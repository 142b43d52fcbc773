#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tst::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitRuntime = 4;
inline constexpr int kExitIo = 5;

inline constexpr const char* kToolVersion = "0.1.0";

/// Parses and runs one command; never throws. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tst::cli
