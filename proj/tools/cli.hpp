#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace presel::cli {

// Exit codes: 0 success, 1 data error, 2 usage error (bad flags or config,
// missing files, stage artifacts that do not fit together).
inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace presel::cli
