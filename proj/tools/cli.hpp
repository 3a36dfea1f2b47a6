#pragma once

#include <string>
#include <vector>

namespace auecrl::cli {

// Runs the full command-line interface on already-split arguments (excluding
// argv[0]). Returns the process exit code:
//   0 success, 2 config/usage error, 3 file error, 4 numeric failure,
//   5 gradient verification failure.
int run(const std::vector<std::string>& args);

}  // namespace auecrl::cli
