#pragma once

#include <iosfwd>

namespace btpmbm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

/// Entry point of the `btpmbm` command (simulate | run | evaluate | sweep).
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace btpmbm::cli
