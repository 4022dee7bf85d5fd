#pragma once

#include <iosfwd>

namespace hdkit::cli {

/// Exit codes: 0 success/valid, 1 validation-invalid, 2 input or config error, 3 internal error.
enum ExitCode : int { kOk = 0, kInvalid = 1, kInputError = 2, kInternalError = 3 };

/// Runs the `hdkit` multi-command tool. Human-readable summaries go to `out`,
/// diagnostics to `err`; machine-readable output only to --report files.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hdkit::cli
