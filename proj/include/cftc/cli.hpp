#pragma once

#include <iosfwd>

namespace cftc {

// Exit codes: 0 success, 2 input error, 3 numerical abort, 4 integrity error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cftc
