#pragma once

#include <ostream>

namespace firelite::cli {

// Stable process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitWeights = 3;
inline constexpr int kExitUsage = 4;
inline constexpr int kExitLayout = 5;

/// Entry point of the `firelite` tool with injectable streams so tests can
/// drive it in-process. The weights path falls back to $FIRELITE_WEIGHTS.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace firelite::cli
