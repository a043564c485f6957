#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mollify/error.hpp"

namespace mollify::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitDataError = 1,
  kExitUsage = 2,
  kExitPartialFailure = 3,
};

/// Bad flags or flag combinations (exit 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed input files (exit 1).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Parses and runs one command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mollify::cli
