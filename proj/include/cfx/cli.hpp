#pragma once

#include <string>
#include <vector>

namespace cfx::cli {

/// Stable exit-code contract for scripting.
enum ExitCode : int {
  kSuccess = 0,
  kConfigError = 2,
  kIoError = 3,
  kPreconditionError = 4,
  kInternalError = 1,
};

/// Runs `cfx <command> ...`. args[0] is the program name. Never throws.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace cfx::cli
