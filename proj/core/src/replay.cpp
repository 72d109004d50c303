#include "dmaddpg/replay.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "dmaddpg/binary_io.hpp"

namespace dmaddpg {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0 || capacity > kMaxReplayCapacity) {
    throw std::invalid_argument("ReplayBuffer: capacity must lie in [1, " + std::to_string(kMaxReplayCapacity) + "]");
  }
}

std::size_t ReplayBuffer::slot_of(std::size_t i) const {
  // Before the first wrap the oldest record is in slot 0.
  return size_ < capacity_ ? i : (write_cursor_ + i) % capacity_;
}

void ReplayBuffer::push(const Transition& t) {
  if (obs_dim_ < 0) {
    if (t.local_observation.size() == 0 || t.joint_action.size() == 0) {
      throw std::invalid_argument("ReplayBuffer::push: empty observation or action");
    }
    obs_dim_ = t.local_observation.size();
    action_dim_ = t.joint_action.size();
  }
  if (t.local_observation.size() != obs_dim_ || t.next_local_observation.size() != obs_dim_ ||
      t.joint_action.size() != action_dim_) {
    throw std::invalid_argument("ReplayBuffer::push: transition dimensions differ from buffer dimensions");
  }
  const auto od = static_cast<std::size_t>(obs_dim_);
  const auto ad = static_cast<std::size_t>(action_dim_);
  const std::size_t slot = write_cursor_;
  if (size_ < capacity_) {
    observations_.resize((slot + 1) * od);
    next_observations_.resize((slot + 1) * od);
    actions_.resize((slot + 1) * ad);
    rewards_.resize(slot + 1);
    ++size_;
  }
  std::copy_n(t.local_observation.data(), od, observations_.begin() + static_cast<std::ptrdiff_t>(slot * od));
  std::copy_n(t.next_local_observation.data(), od, next_observations_.begin() + static_cast<std::ptrdiff_t>(slot * od));
  std::copy_n(t.joint_action.data(), ad, actions_.begin() + static_cast<std::ptrdiff_t>(slot * ad));
  rewards_[slot] = t.local_reward;
  write_cursor_ = (write_cursor_ + 1) % capacity_;
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("ReplayBuffer::at: index out of range");
  const std::size_t slot = slot_of(i);
  Minibatch mb = gather({slot});
  return Transition{mb.observations.col(0), mb.joint_actions.col(0), mb.rewards[0], mb.next_observations.col(0)};
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("ReplayBuffer: cannot sample from an empty buffer");
  std::vector<std::size_t> idx(count);
  // Slots [0, size_) are exactly the live records in either ring state.
  for (std::size_t& k : idx) k = static_cast<std::size_t>(rng.index(size_));
  return idx;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  const Minibatch mb = sample_batch(count, rng);
  std::vector<Transition> out;
  out.reserve(count);
  for (Eigen::Index j = 0; j < mb.size(); ++j) {
    out.push_back(Transition{mb.observations.col(j), mb.joint_actions.col(j), mb.rewards[j],
                             mb.next_observations.col(j)});
  }
  return out;
}

Minibatch ReplayBuffer::sample_batch(std::size_t count, Rng& rng) const { return gather(sample_indices(count, rng)); }

Minibatch ReplayBuffer::gather(const std::vector<std::size_t>& slots) const {
  const auto n = static_cast<Eigen::Index>(slots.size());
  Minibatch mb;
  mb.observations.resize(obs_dim_, n);
  mb.next_observations.resize(obs_dim_, n);
  mb.joint_actions.resize(action_dim_, n);
  mb.rewards.resize(n);
  const auto od = static_cast<std::size_t>(obs_dim_);
  const auto ad = static_cast<std::size_t>(action_dim_);
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t s = slots[static_cast<std::size_t>(j)];
    if (s >= size_) throw std::out_of_range("ReplayBuffer::gather: slot out of range");
    std::copy_n(observations_.begin() + static_cast<std::ptrdiff_t>(s * od), od, mb.observations.col(j).data());
    std::copy_n(next_observations_.begin() + static_cast<std::ptrdiff_t>(s * od), od,
                mb.next_observations.col(j).data());
    std::copy_n(actions_.begin() + static_cast<std::ptrdiff_t>(s * ad), ad, mb.joint_actions.col(j).data());
    mb.rewards[j] = rewards_[s];
  }
  return mb;
}

void ReplayBuffer::save(std::ostream& out) const {
  BinaryWriter w(out);
  w.magic("DMRB");
  w.u32(1);
  w.u64(capacity_);
  w.u64(size_);
  w.u64(write_cursor_);
  w.i64(obs_dim_);
  w.i64(action_dim_);
  w.f64s(observations_);
  w.f64s(actions_);
  w.f64s(rewards_);
  w.f64s(next_observations_);
}

ReplayBuffer ReplayBuffer::load(std::istream& in) {
  BinaryReader r(in);
  r.expect_magic("DMRB");
  if (r.u32() != 1) throw std::runtime_error("replay container: unsupported format version");
  ReplayBuffer b(r.u64());
  b.size_ = r.u64();
  b.write_cursor_ = r.u64();
  b.obs_dim_ = r.i64();
  b.action_dim_ = r.i64();
  b.observations_ = r.f64_vector();
  b.actions_ = r.f64_vector();
  b.rewards_ = r.f64_vector();
  b.next_observations_ = r.f64_vector();
  if (b.size_ > b.capacity_ || b.write_cursor_ >= b.capacity_ || b.rewards_.size() != b.size_) {
    throw std::runtime_error("replay container: inconsistent ring state");
  }
  return b;
}

}  // namespace dmaddpg
