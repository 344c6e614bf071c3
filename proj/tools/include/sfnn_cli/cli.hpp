#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sfnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // verify suite failed
inline constexpr int kExitDataError = 2;
inline constexpr int kExitDiverged = 3;

/// Runs the `sfnn` command line with args excluding the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sfnn::cli
