#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ecgtf::cli {

/// Parse `args` (without the program name) and run one command. Returns the
/// process exit code. Failures write a single JSON line
/// {"error", "stage", "type"} to `err` and return nonzero.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ecgtf::cli
