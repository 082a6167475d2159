#pragma once

#include <exception>
#include <string>
#include <vector>

namespace vqa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Maps a library exception onto the process exit code.
int exit_code_for(const std::exception& e);

// Whole command line, argv[0] included. Never throws.
int run(const std::vector<std::string>& args);

}  // namespace vqa::cli
