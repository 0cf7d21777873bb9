#pragma once

#include <string>

namespace ctxrr::cli {

inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Parses argv, runs one subcommand and maps errors to exit codes:
// 0 success, 2 usage or configuration, 3 data, 4 numeric or dimension.
int run(int argc, char** argv);

std::string fmt_double(double v);
std::string fmt_sci(double v);

}  // namespace ctxrr::cli
