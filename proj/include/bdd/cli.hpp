#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bdd::cli {

/// Runs one CLI invocation. args excludes the program name. Returns 0 on
/// success, 1 on verification or runtime failure, 2 on usage errors.
int cli_main(std::vector<std::string> args, std::ostream& out, std::ostream& err);

} // namespace bdd::cli
