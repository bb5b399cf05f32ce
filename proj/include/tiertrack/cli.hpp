#pragma once

#include <string>
#include <vector>

namespace tiertrack {

// Runs one CLI invocation. `args` excludes the program name. Returns the
// process exit code: 0 success, 1 usage error, 2 data or model error
// (unreadable input, saturation, infeasible plan, replica bounds).
int dispatch(const std::vector<std::string>& args);

int dispatch(int argc, const char* const* argv);

}  // namespace tiertrack
