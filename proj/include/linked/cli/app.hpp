#pragma once

#include <string>
#include <vector>

namespace linked::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitStageError = 1;
inline constexpr int kExitUsage = 2;

// Parses argv (program name first) and runs the chosen subcommand.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace linked::cli
