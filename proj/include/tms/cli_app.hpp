#pragma once

#include <string>
#include <vector>

namespace tms {

// Process exit codes, one per error class.
enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitConfig = 2,
    kExitNonConvergence = 3,
    kExitDomainExhausted = 4,
    kExitInfeasibleCost = 5,
};

// Full CLI entry point; the tmsolve binary is a thin wrapper around this so
// tests can drive commands in-process.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace tms
