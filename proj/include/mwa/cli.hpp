#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mwa::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsageError = 2,
  kInvariantViolation = 3,
};

/// Runs `mwa <args...>`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mwa::cli
