#pragma once

#include <ostream>

namespace lpcore {

// Subcommands solve, gen, certify, bench. Returns 0 on success, 1 on usage
// or input errors and 2 when a solve fails.
int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lpcore
