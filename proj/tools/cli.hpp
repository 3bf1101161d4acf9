#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mfusion::cli {

// Runs one batch invocation; `args` excludes the program name. Returns the
// process exit code: 0 success, 1 validation error, 2 runtime failure.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace mfusion::cli
