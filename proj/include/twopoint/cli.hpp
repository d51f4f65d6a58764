#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace twopoint::cli {

/// Exit codes by error category.
enum ExitCode : int {
  kOk = 0,
  kRuntime = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kData = 5,
  kTraining = 6,
};

/// Runs the `twopoint` command line; args excludes the program name.
/// Failures print one line "error: <category>: <message>" to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace twopoint::cli
