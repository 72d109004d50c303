#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dmaddpg/rng.hpp"

namespace dmaddpg {

// One local replay record. The joint action of all agents is stored, not
// only the agent's own action; critics condition on it.
struct Transition {
  Eigen::VectorXd local_observation;
  Eigen::VectorXd joint_action;
  double local_reward = 0.0;
  Eigen::VectorXd next_local_observation;

  bool operator==(const Transition&) const = default;
};

// Column-per-sample view of a sampled minibatch.
struct Minibatch {
  Eigen::MatrixXd observations;
  Eigen::MatrixXd joint_actions;
  Eigen::VectorXd rewards;
  Eigen::MatrixXd next_observations;

  Eigen::Index size() const { return rewards.size(); }
};

inline constexpr std::size_t kDefaultReplayCapacity = 100'000;
inline constexpr std::size_t kMaxReplayCapacity = 1'000'000;
inline constexpr std::size_t kDefaultWarmup = 1024;

// Fixed-capacity FIFO ring. Dimensions are fixed by the first push.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = kDefaultReplayCapacity);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  // Throws std::invalid_argument when dims differ from earlier transitions.
  void push(const Transition& t);

  // i-th oldest stored transition.
  Transition at(std::size_t i) const;

  // Uniform draws with replacement. Throws std::logic_error if empty.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;
  std::vector<Transition> sample(std::size_t count, Rng& rng) const;
  Minibatch sample_batch(std::size_t count, Rng& rng) const;
  Minibatch gather(const std::vector<std::size_t>& indices) const;

  void save(std::ostream& out) const;
  static ReplayBuffer load(std::istream& in);

 private:
  std::size_t slot_of(std::size_t i) const;

  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t write_cursor_ = 0;
  Eigen::Index obs_dim_ = -1;
  Eigen::Index action_dim_ = -1;
  std::vector<double> observations_;
  std::vector<double> actions_;
  std::vector<double> rewards_;
  std::vector<double> next_observations_;
};

}  // namespace dmaddpg
