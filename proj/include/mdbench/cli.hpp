#pragma once

// The mdbench command line. Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <atomic>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace mdbench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

/// `args` excludes the program name. `in` and `out` carry the wire protocol
/// for `refmodel serve`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

/// Polled between batches of an evaluation run; the tool sets it from SIGINT.
std::atomic<bool>& interrupt_flag();

}  // namespace mdbench::cli
