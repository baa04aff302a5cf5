#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace zseg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

/// Runs one `zseg` invocation (arguments without the program name).
/// Structured log records go to `out` as JSON lines, diagnostics to `err`.
/// Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zseg
