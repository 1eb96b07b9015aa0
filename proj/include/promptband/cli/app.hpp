#pragma once

#include <iosfwd>

namespace promptband {

/// Exit codes: 0 success, 1 oracle or runtime failure, 2 configuration or
/// validation error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace promptband
