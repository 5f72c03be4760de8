#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qce::cli {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2 };

// Parses and runs one invocation. argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace qce::cli
