#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sdflow::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;

/// Entry point of the `sdflow` tool; `args` excludes the program name.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace sdflow::cli
