#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fcp::cli {

enum ExitCode : int {
  kSuccess = 0,
  kConfigError = 2,
  kDataError = 3,
  kNumericError = 4,
};

/// Runs one command: train, explain, importance, compare, bias-report, flip.
/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace fcp::cli
