#pragma once

#include <iosfwd>

namespace qldp::cli {

/// Entry point shared by the qldp binary and the tests. Exit codes:
/// 0 success, 2 config/usage, 3 numerical failure, 4 I/O.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qldp::cli
