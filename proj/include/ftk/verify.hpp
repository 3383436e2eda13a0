#pragma once

#include <iosfwd>

namespace ftk {

// Runs one self-check suite per module, printing a PASS/FAIL line each (or a
// JSON object per suite when json_lines is set). Returns the failure count.
int run_verify_suites(std::ostream& out, bool json_lines = false);

}  // namespace ftk
