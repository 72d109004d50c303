#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dmaddpg/harness.hpp"

namespace dmaddpg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

// Builds the config for `train` from its arguments (without the subcommand).
// Precedence: defaults < --preset < --config file < individual flags.
// Throws std::invalid_argument on unknown flags or an invalid combination.
ExperimentConfig parse_train_cli(const std::vector<std::string>& args);

// Entry point shared by main() and the tests.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dmaddpg::cli
