#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dspr::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,  // bad arguments, config, parse or I/O failure
  kShape = 3,   // shape mismatch or violated precondition
  kDiverged = 4,
};

/// Runs the dspr command line; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dspr::cli
