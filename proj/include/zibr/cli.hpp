#pragma once

#include <iosfwd>
#include <map>
#include <string>

namespace zibr::cli {

/// Entry point behind the `zibr` executable. Returns the process exit status: 0 on success,
/// 1 on a runtime error (a JSON error record is written to `err`), 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// `key=value` lines; blank lines and lines starting with '#' are ignored. Keys are flag names
/// without the leading dashes. Throws ValidationError on a malformed line, IoError on a missing file.
std::map<std::string, std::string> read_key_values(const std::string& path);

}  // namespace zibr::cli
