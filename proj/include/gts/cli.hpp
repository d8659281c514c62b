#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gts::cli {

inline constexpr int kExitOk = 0;
/// Compilation diagnostics, I/O failures or a failed diff.
inline constexpr int kExitDiagnostics = 1;
/// Run-time argument validation errors.
inline constexpr int kExitRuntime = 2;
/// Malformed command line.
inline constexpr int kExitUsage = 64;

/// Entry point of `gts {compile|run|diff|bench}`. `args` excludes the
/// program name. Machine output goes to `out`, diagnostics to `err`.
int main(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace gts::cli
