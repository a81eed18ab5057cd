#pragma once

#include <string>
#include <vector>

namespace fg::cli {

// Exit codes: 0 success, 1 runtime failure, 2 bad usage, 3 missing or unreadable input file.
inline constexpr int kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitMissingFile = 3;

// args excludes the program name.
int run(const std::vector<std::string>& args);

// key=value lines ('#' comments, blank lines ignored) as "--key value" pairs.
std::vector<std::string> expand_config(const std::string& path);

}  // namespace fg::cli
