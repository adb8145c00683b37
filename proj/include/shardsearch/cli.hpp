#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace shardsearch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// `args` excludes the program name. Data goes to `out` (JSON or JSONL),
// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace shardsearch::cli
