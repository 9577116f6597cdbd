#pragma once

#include <iosfwd>

namespace essc::cli {

// Entry point shared by the binary and the tests. Returns the process exit
// code; errors are reported on `err` as "error[Kind]: message".
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace essc::cli
