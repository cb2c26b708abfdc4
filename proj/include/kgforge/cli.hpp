#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace kgforge::cli {

enum ExitCode : int { Ok = 0, Failure = 1, BadArguments = 2, IoFailure = 3, ValidationFailure = 4 };

// Entry point for the `kgforge` tool. `args` excludes the program name.
// Diagnostics go to `err` only; `out` carries command results.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Flat `key = value` lines with `[section]` headers, `#` comments and blank
// lines. Keys inside a section are returned as `section.key`. Throws
// ParseError on a malformed line.
std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in);

}  // namespace kgforge::cli
