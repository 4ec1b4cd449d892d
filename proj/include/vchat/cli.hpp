#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vchat {

/// Entry point of the `vchat` command line. `args` excludes the program name.
/// Returns the process exit code: 0 on success, 1 when `validate` finds
/// errors, 2 for usage or runtime failures.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace vchat
