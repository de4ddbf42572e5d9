#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pathkernel::cli {

enum ExitCode : int {
    kSuccess = 0,
    kCheckFailed = 1,
    kConfigError = 2,
    kDiverged = 3,
    kFormatError = 4,
    kInsufficientData = 5,
};

/// Runs one subcommand (train, reconstruct, attribute, sweep, check).
/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pathkernel::cli
