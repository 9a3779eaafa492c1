#ifndef BINSD_CLI_HPP
#define BINSD_CLI_HPP

#include <string>
#include <vector>

namespace binsd {

/// Runs one CLI invocation. Exit codes: 0 success, 1 usage error,
/// 2 data error. Every successful run prints a deterministic
/// run-manifest line (seed, config hash, versions) to stdout.
int run_command(const std::vector<std::string>& args);
int run_command(int argc, const char* const* argv);

}  // namespace binsd

#endif  // BINSD_CLI_HPP
