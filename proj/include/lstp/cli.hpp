#pragma once

#include <ostream>

namespace lstp::cli {

/// Exit codes: 0 success, 1 usage error, 2 runtime error.
enum ExitCode { kOk = 0, kUsage = 1, kRuntime = 2 };

/// Entry point of the lstp_nav tool. Subcommands: train, eval, compare,
/// plot, inspect-replay. Flags may also come from LSTP_* environment
/// variables; explicit flags win.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lstp::cli
