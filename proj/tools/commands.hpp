#pragma once

namespace atomchip::cli {

/// Parses argv, runs the subcommand and returns the process exit code:
/// 0 ok, 2 usage, 3 scene error, 4 physics or convergence error.
int run_cli(int argc, char** argv);

}  // namespace atomchip::cli
