#pragma once

#include <ostream>

namespace fluxlattice::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;

/// Entry point of the `fluxlattice` executable. Returns the process exit
/// code: 0 success, 1 config or usage error, 2 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace fluxlattice::cli
