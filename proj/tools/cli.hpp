#pragma once

#include <iosfwd>

namespace atpg::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kInvalidConfig = 2,
  kNonFiniteGradient = 3,
  kCorruptCheckpoint = 4,
  kGradCheckFailed = 5,
};

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace atpg::cli
