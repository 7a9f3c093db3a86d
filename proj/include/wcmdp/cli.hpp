#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wcmdp {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitValidation = 3,
  kExitFeasibility = 4,
  kExitAssumption = 5,
};

inline constexpr const char* kVersion = "0.1.0";

/// Entry point of the `wcmdp` tool. Data outputs go to files named by the
/// flags (or to `out`), messages to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Writes "<output>.manifest.json" describing how `output` was produced.
void write_manifest(const std::string& output, const std::string& command,
                    const std::vector<std::string>& args, unsigned long long seed,
                    const std::string& instance_hash);

}  // namespace wcmdp
