#pragma once

#include <string>
#include <vector>

namespace siegel::cli {

// command-line entry point; diagnostics go to standard error, artifacts to
// the --out directory of each subcommand
// exit codes: 0 success, 1 input error, 2 numerical failure, 3 failed --check
int cli_main(int argc, const char* const* argv);

// same, for driving the tool in-process; args exclude the program name
int run(const std::vector<std::string>& args);

}  // namespace siegel::cli
