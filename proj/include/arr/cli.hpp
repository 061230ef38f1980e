#pragma once

#include <string>
#include <vector>

namespace arr {

// Exit codes: 0 success, 1 internal/criterion failure, 2 usage,
// 3 config, 4 data, 5 backend, 6 precondition.
int run_cli(const std::vector<std::string>& args);

}  // namespace arr
