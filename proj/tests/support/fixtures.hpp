#pragma once

#include "convert.hpp"
#include "dmaddpg/agents.hpp"

namespace testing_support {

// Small surrogate-policy agent with randomized (non-zero) biases.
inline dmaddpg::AgentRuntime random_agent(int obs_dim, int joint_dim, std::vector<int> hidden, dmaddpg::Rng& rng,
                                          bool centralized = false, int critic_obs_dim = -1, int index = 0) {
  dmaddpg::AgentShape shape;
  shape.index = index;
  shape.centralized = centralized;
  shape.actor_input_dim = obs_dim;
  shape.actor_output_dim = centralized ? 2 : joint_dim;
  shape.critic_input_dim = (critic_obs_dim < 0 ? obs_dim : critic_obs_dim) + joint_dim;
  shape.own_action = {2 * index, 2};
  dmaddpg::AgentHyper hyper;
  hyper.hidden_dims = std::move(hidden);
  hyper.buffer_capacity = 64;
  dmaddpg::AgentRuntime a = dmaddpg::make_agent(shape, hyper, rng);
  for (dmaddpg::ParamVector* p : {&a.actor, &a.critic}) {
    for (auto& v : p->span()) v += rng.uniform(-0.3, 0.3);
  }
  a.actor_target = a.actor;
  a.critic_target = a.critic;
  for (auto& v : a.actor_target.span()) v += rng.uniform(-0.05, 0.05);
  for (auto& v : a.critic_target.span()) v += rng.uniform(-0.05, 0.05);
  return a;
}

inline dmaddpg::Minibatch random_batch(int obs_dim, int joint_dim, int size, dmaddpg::Rng& rng) {
  dmaddpg::Minibatch b;
  auto fill = [&](Eigen::MatrixXd& m, int rows, double lo, double hi) {
    m.resize(rows, size);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(lo, hi);
  };
  fill(b.observations, obs_dim, -1.5, 1.5);
  fill(b.joint_actions, joint_dim, -1.0, 1.0);
  fill(b.next_observations, obs_dim, -1.5, 1.5);
  b.rewards.resize(size);
  for (int k = 0; k < size; ++k) b.rewards[k] = rng.uniform(-3, 0);
  return b;
}

inline std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace testing_support
