#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dmaddpg {

enum class AccessKind : int { observation = 0, reward = 1, actor_params = 2, critic_params = 3 };
inline constexpr int kAccessKindCount = 4;

std::string to_string(AccessKind kind);

// Counts which agent's trainer read which agent's data. Every cross-agent
// access in the training loop goes through a recording accessor.
class AccessAudit {
 public:
  explicit AccessAudit(int n_agents = 0);

  int n_agents() const { return n_; }
  void record(int reader, int owner, AccessKind kind);
  std::uint64_t count(AccessKind kind, int reader, int owner) const;
  // Reads with reader != owner.
  std::uint64_t foreign_reads(AccessKind kind) const;
  void clear();

 private:
  int n_;
  std::vector<std::uint64_t> counts_;
};

}  // namespace dmaddpg
