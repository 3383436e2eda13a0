#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ftk::cli {

// Parses and runs one command. `args` excludes the program name. Returns the
// process exit code: 0 success, 1 domain error (bad input data or state),
// 2 usage error. Data goes to `out`, diagnostics to `err`.
int dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace ftk::cli
