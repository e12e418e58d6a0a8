#pragma once

// Command-line front end: run, audit, compare, sweep, selftest.

#include <ostream>
#include <string>
#include <vector>

namespace gu {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;      // bad flags, unreadable or invalid config
inline constexpr int kExitViolation = 2;  // audit/selftest violation or failed episode

// `args` includes the program name as its first element.
int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out,
                       std::ostream& err);

}  // namespace gu
