#include "dmaddpg/audit.hpp"

#include <algorithm>
#include <stdexcept>

namespace dmaddpg {

std::string to_string(AccessKind kind) {
  switch (kind) {
    case AccessKind::observation:
      return "observation";
    case AccessKind::reward:
      return "reward";
    case AccessKind::actor_params:
      return "actor_params";
    case AccessKind::critic_params:
      return "critic_params";
  }
  return "unknown";
}

AccessAudit::AccessAudit(int n_agents)
    : n_(n_agents), counts_(static_cast<std::size_t>(kAccessKindCount * n_agents * n_agents), 0) {}

void AccessAudit::record(int reader, int owner, AccessKind kind) {
  if (reader < 0 || reader >= n_ || owner < 0 || owner >= n_) throw std::out_of_range("AccessAudit: agent index");
  ++counts_[static_cast<std::size_t>((static_cast<int>(kind) * n_ + reader) * n_ + owner)];
}

std::uint64_t AccessAudit::count(AccessKind kind, int reader, int owner) const {
  return counts_.at(static_cast<std::size_t>((static_cast<int>(kind) * n_ + reader) * n_ + owner));
}

std::uint64_t AccessAudit::foreign_reads(AccessKind kind) const {
  std::uint64_t total = 0;
  for (int r = 0; r < n_; ++r) {
    for (int o = 0; o < n_; ++o) {
      if (r != o) total += count(kind, r, o);
    }
  }
  return total;
}

void AccessAudit::clear() { std::fill(counts_.begin(), counts_.end(), 0); }

}  // namespace dmaddpg
