#pragma once

#include <iosfwd>

namespace isodelay {

constexpr const char* kToolVersion = "0.1.0";

/// Runs the command line `argv[0] <subcommand> ...`. Exit codes: solve
/// 0 converged / 2 invalid input / 3 not converged; verify and noether
/// 0 pass / 1 verdict failure / 2 invalid input.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace isodelay
