#pragma once

#include <string>
#include <vector>

namespace pime {

// Full command-line entry point. Returns the process exit code:
// 0 success, 1 usage error, 2 data error, 3 numerical failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace pime
