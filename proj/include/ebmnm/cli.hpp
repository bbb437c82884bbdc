// Command-line front end: simulate, fit, posterior, evaluate, bench.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ebmnm::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kNumericalFailure = 2,
  kIoFailure = 3,
};

/// Runs one command. args[0] is the program name. Every flag may also be
/// given as `key = value` lines in a file passed with --config; explicit
/// flags take precedence.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace ebmnm::cli
