#pragma once

#include <iosfwd>

namespace alert_surface::cli {

/// Exit codes: 0 success, 2 usage or invalid argument, 3 data error,
/// 4 non-convergence, 1 anything else.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace alert_surface::cli
