#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace peak {

// Entry point of the `peak` command. Returns the process exit status:
// 0 success, 1 usage error, 2 data error, 3 I/O error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace peak
