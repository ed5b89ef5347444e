#pragma once

#include <iosfwd>

namespace vrec {

// Entry point of the `vrec` tool. Returns 0 on success, 1 on a runtime
// failure and 2 on a usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace vrec
