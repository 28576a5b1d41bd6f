#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dustmns::cli {

/// Process exit codes.
enum ExitCode : int {
    kSuccess = 0,
    kInternalError = 1,
    kValidationError = 2,
    kNumericalError = 3,
    kIoError = 4,
};

/// Runs the command line front end; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dustmns::cli
