#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace concert {

/// Runs one command line (args[0] is the program name). Failures print a
/// single JSON line {"error": code, "message": text} to `err` and return
/// nonzero.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace concert
