#ifndef HIBP_CLI_HPP
#define HIBP_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace hibp {

// Exit codes shared by every command.
enum ExitCode : int { kExitOk = 0, kExitInternal = 1, kExitValidation = 2, kExitIo = 3, kExitNumeric = 4 };

// Runs one hibp-lab command. args excludes the program name. The JSON
// summary goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hibp

#endif  // HIBP_CLI_HPP
