#pragma once

#include <iosfwd>

namespace replay {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // usage or validation error
inline constexpr int kExitRuntime = 2;  // failure while running

// Entry point of replay_cli. Subcommands: simulate, estimate, experiment,
// zeta, blom, report.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace replay
