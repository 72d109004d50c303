#pragma once

#include <string>

namespace dmaddpg {

// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

}  // namespace dmaddpg
