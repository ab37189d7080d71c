#pragma once

#include <iosfwd>

namespace pcrowd {

// Entry point of the `pcrowd` tool. Returns 0 on success, 1 on validation
// errors (bad flags, config or inputs), 2 on backend or I/O failures.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pcrowd
