#pragma once

// Scalar re-statements of the training objectives, evaluated sample by sample
// with the reference forward pass.

#include "fixtures.hpp"

namespace testing_support {

inline double q_ref(const dmaddpg::AgentRuntime& a, const std::vector<double>& critic, const std::vector<double>& obs,
                    const std::vector<double>& action) {
  return oracle::forward(to_oracle(a.critic_spec), critic, concat(obs, action))[0];
}

// zeta sum_j row_j |theta - theta_j|^2 / (|theta_j|^2 + floor)
inline double penalty_ref(const std::vector<double>& theta, const std::vector<std::vector<double>>& neighbours,
                          const std::vector<double>& row, double zeta, double floor = 1e-8) {
  double pen = 0.0;
  for (std::size_t j = 0; j < neighbours.size(); ++j) {
    double num = 0.0, den = floor;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      num += (theta[k] - neighbours[j][k]) * (theta[k] - neighbours[j][k]);
      den += neighbours[j][k] * neighbours[j][k];
    }
    pen += row[j] * num / den;
  }
  return zeta * pen;
}

// (1/S) sum (y - Q)^2 + zeta sum_j row_j |theta - theta_j|^2 / (|theta_j|^2 + floor)
inline double critic_loss_ref(const dmaddpg::AgentRuntime& a, const dmaddpg::Minibatch& b,
                              const Eigen::VectorXd& y, const std::vector<double>& theta,
                              const std::vector<std::vector<double>>& neighbours = {},
                              const std::vector<double>& row = {}, double zeta = 0.0, double floor = 1e-8) {
  double mse = 0.0;
  for (Eigen::Index s = 0; s < b.size(); ++s) {
    const double r = y[s] - q_ref(a, theta, column(b.observations, s), column(b.joint_actions, s));
    mse += r * r;
  }
  mse /= static_cast<double>(b.size());
  return mse + penalty_ref(theta, neighbours, row, zeta, floor);
}

// (1/S) sum Q(o, A) with A taken from the surrogate policy on masked slots.
inline double surrogate_ref(const dmaddpg::AgentRuntime& a, const dmaddpg::Minibatch& b, const std::vector<bool>& mask,
                            const std::vector<double>& actor) {
  const std::vector<double> critic = to_std(a.critic.values);
  double total = 0.0;
  for (Eigen::Index s = 0; s < b.size(); ++s) {
    const std::vector<double> o = column(b.observations, s);
    const std::vector<double> mu = oracle::forward(to_oracle(a.actor_spec), actor, o);
    std::vector<double> act = column(b.joint_actions, s);
    for (std::size_t k = 0; k < act.size(); ++k) {
      if (mask[k]) act[k] = mu[k];
    }
    total += q_ref(a, critic, o, act);
  }
  return total / static_cast<double>(b.size());
}

// (1/S) sum Q(x, a_1, .., mu_i(o_i), .., a_N) for a centralized agent.
inline double centralized_ref(const dmaddpg::AgentRuntime& a, int obs_offset, int obs_dim, const dmaddpg::Minibatch& b,
                              const std::vector<double>& actor) {
  const std::vector<double> critic = to_std(a.critic.values);
  double total = 0.0;
  for (Eigen::Index s = 0; s < b.size(); ++s) {
    const std::vector<double> x = column(b.observations, s);
    const std::vector<double> own(x.begin() + obs_offset, x.begin() + obs_offset + obs_dim);
    const std::vector<double> mu = oracle::forward(to_oracle(a.actor_spec), actor, own);
    std::vector<double> act = column(b.joint_actions, s);
    act[static_cast<std::size_t>(a.own_action.offset)] = mu[0];
    act[static_cast<std::size_t>(a.own_action.offset) + 1] = mu[1];
    total += q_ref(a, critic, x, act);
  }
  return total / static_cast<double>(b.size());
}

}  // namespace testing_support
