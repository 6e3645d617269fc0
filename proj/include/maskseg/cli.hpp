#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace maskseg::cli {

// Runs one invocation; args excludes the program name. Machine-readable
// output goes to `out`, diagnostics to `err`.
// Exit codes: 0 ok, 1 usage, 2 I/O or format, 3 network, 4 validation.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(const std::vector<std::string>& args);

}  // namespace maskseg::cli
