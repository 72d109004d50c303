#include "dmaddpg/agents.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "dmaddpg/errors.hpp"

namespace dmaddpg {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::maddpg:
      return "maddpg";
    case Algorithm::decentralized:
      return "decentralized";
    case Algorithm::hard_consensus:
      return "hard_consensus";
    case Algorithm::soft_consensus:
      return "soft_consensus";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (Algorithm a : {Algorithm::maddpg, Algorithm::decentralized, Algorithm::hard_consensus,
                      Algorithm::soft_consensus}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

std::string to_string(Setting s) { return s == Setting::cooperative ? "cooperative" : "mixed"; }

Setting setting_from_string(const std::string& name) {
  if (name == "cooperative") return Setting::cooperative;
  if (name == "mixed") return Setting::mixed;
  throw std::invalid_argument("unknown setting '" + name + "'");
}

double NoiseSpec::sigma(std::int64_t step) const {
  if (step >= decay_steps) return sigma_final;
  const double frac = static_cast<double>(std::max<std::int64_t>(step, 0)) / static_cast<double>(decay_steps);
  return sigma_initial + (sigma_final - sigma_initial) * frac;
}

void NoiseSpec::validate() const {
  if (!(sigma_final >= 0.0 && sigma_initial >= sigma_final)) {
    throw std::invalid_argument("NoiseSpec: need 0 <= sigma_final <= sigma_initial");
  }
  if (decay_steps < 1) throw std::invalid_argument("NoiseSpec: decay_steps must be positive");
}

TeamAssignment TeamAssignment::single_team(int n_agents) {
  return TeamAssignment{std::vector<int>(static_cast<std::size_t>(n_agents), 0)};
}

TeamAssignment TeamAssignment::one_vs_rest(int n_agents) {
  TeamAssignment t{std::vector<int>(static_cast<std::size_t>(n_agents), 1)};
  t.team_of[0] = 0;
  return t;
}

int TeamAssignment::team_count() const {
  return static_cast<int>(std::set<int>(team_of.begin(), team_of.end()).size());
}

std::vector<int> TeamAssignment::teammates(int agent) const { return members(team_of.at(static_cast<std::size_t>(agent))); }

std::vector<int> TeamAssignment::adversaries(int agent) const {
  std::vector<int> out;
  const int team = team_of.at(static_cast<std::size_t>(agent));
  for (int k = 0; k < n_agents(); ++k) {
    if (team_of[static_cast<std::size_t>(k)] != team) out.push_back(k);
  }
  return out;
}

std::vector<int> TeamAssignment::members(int team) const {
  std::vector<int> out;
  for (int k = 0; k < n_agents(); ++k) {
    if (team_of[static_cast<std::size_t>(k)] == team) out.push_back(k);
  }
  return out;
}

void TeamAssignment::validate() const {
  if (team_of.empty()) throw std::invalid_argument("TeamAssignment: no agents");
  for (int t : team_of) {
    if (t < 0) throw std::invalid_argument("TeamAssignment: team ids must be non-negative");
  }
}

AgentRuntime make_agent(const AgentShape& shape, const AgentHyper& hyper, Rng& init_rng) {
  AgentRuntime a;
  a.index = shape.index;
  a.centralized = shape.centralized;
  a.own_action = shape.own_action;
  a.actor_spec = MlpSpec{shape.actor_input_dim, hyper.hidden_dims, shape.actor_output_dim, Activation::relu,
                         Activation::tanh};
  a.critic_spec = MlpSpec{shape.critic_input_dim, hyper.hidden_dims, 1, Activation::relu, Activation::identity};
  a.actor = mlp_init(a.actor_spec, init_rng);
  a.critic = mlp_init(a.critic_spec, init_rng);
  a.actor_target = a.actor;
  a.critic_target = a.critic;
  a.actor_optimizer = AdamState::for_size(a.actor.size(), hyper.actor_learning_rate);
  a.adversary_actor_optimizer = AdamState::for_size(a.actor.size(), hyper.actor_learning_rate);
  a.critic_optimizer = AdamState::for_size(a.critic.size(), hyper.critic_learning_rate);
  a.buffer = ReplayBuffer(hyper.buffer_capacity);
  return a;
}

Action select_action(const AgentRuntime& agent, const Eigen::VectorXd& observation, const Vec2& noise) {
  if (observation.size() != agent.actor_spec.input_dim) {
    throw std::invalid_argument("select_action: observation has wrong dimension");
  }
  const Eigen::VectorXd out = mlp_forward(agent.actor, agent.actor_spec, observation);
  const Vec2 own = agent.centralized ? Vec2(out.head<2>()) : Vec2(out.segment<2>(agent.own_action.offset));
  return (own + noise).cwiseMax(-1.0).cwiseMin(1.0);
}

Eigen::MatrixXd critic_inputs(const Eigen::MatrixXd& observations, const Eigen::MatrixXd& joint_actions) {
  Eigen::MatrixXd in(observations.rows() + joint_actions.rows(), observations.cols());
  in.topRows(observations.rows()) = observations;
  in.bottomRows(joint_actions.rows()) = joint_actions;
  return in;
}

namespace {

Eigen::VectorXd bootstrap(const AgentRuntime& agent, const Minibatch& batch, const Eigen::MatrixXd& next_actions,
                          double gamma) {
  const Eigen::MatrixXd q =
      mlp_forward_batch(agent.critic_target, agent.critic_spec, critic_inputs(batch.next_observations, next_actions));
  return batch.rewards + gamma * q.row(0).transpose();
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string(what) + " is not finite");
}

// Shared tail of every actor objective: evaluate Q on the assembled joint
// action, backpropagate 1/S through the critic, and return dQ/dA.
struct CriticThroughActions {
  double value;
  Eigen::MatrixXd action_gradient;
};

CriticThroughActions critic_through_actions(const AgentRuntime& agent, const Eigen::MatrixXd& observations,
                                            const Eigen::MatrixXd& joint_actions) {
  const ForwardPass q = mlp_forward_pass(agent.critic, agent.critic_spec, critic_inputs(observations, joint_actions));
  const auto s = static_cast<double>(observations.cols());
  const double value = q.output().sum() / s;
  const Eigen::MatrixXd cotangent = Eigen::MatrixXd::Constant(1, observations.cols(), 1.0 / s);
  MlpGradients g = mlp_backward(q, agent.critic, agent.critic_spec, cotangent);
  return {value, g.inputs.bottomRows(joint_actions.rows())};
}

}  // namespace

Eigen::VectorXd critic_target_decentralized(const AgentRuntime& agent, const Minibatch& batch, double gamma) {
  const Eigen::MatrixXd next_actions = mlp_forward_batch(agent.actor_target, agent.actor_spec, batch.next_observations);
  return bootstrap(agent, batch, next_actions, gamma);
}

ObservationLayout ObservationLayout::from_env(const EnvConfig& config) {
  ObservationLayout l;
  int offset = 0;
  for (int i = 0; i < config.n_agents; ++i) {
    l.offsets.push_back(offset);
    l.dims.push_back(observation_dim(config, i));
    offset += l.dims.back();
  }
  return l;
}

Eigen::VectorXd critic_target_centralized(const AgentRuntime& agent, std::span<const TargetPolicy> target_policies,
                                          const ObservationLayout& layout, const Minibatch& batch, double gamma) {
  if (target_policies.size() != layout.dims.size()) {
    throw std::invalid_argument("critic_target_centralized: one target policy per agent required");
  }
  Eigen::MatrixXd next_actions(batch.joint_actions.rows(), batch.size());
  for (std::size_t k = 0; k < target_policies.size(); ++k) {
    const TargetPolicy& p = target_policies[k];
    const Eigen::MatrixXd obs_k = batch.next_observations.middleRows(layout.offsets[k], layout.dims[k]);
    next_actions.middleRows(p.slot.offset, p.slot.length) = mlp_forward_batch(*p.params, *p.spec, obs_k);
  }
  return bootstrap(agent, batch, next_actions, gamma);
}

CriticLoss critic_loss(const AgentRuntime& agent, const Minibatch& batch, const Eigen::VectorXd& targets,
                       const SoftPenalty* penalty) {
  if (targets.size() != batch.size()) throw std::invalid_argument("critic_loss: one target per sample required");
  const ForwardPass q =
      mlp_forward_pass(agent.critic, agent.critic_spec, critic_inputs(batch.observations, batch.joint_actions));
  const auto s = static_cast<double>(batch.size());
  const Eigen::RowVectorXd residual = targets.transpose() - q.output().row(0);
  CriticLoss loss;
  loss.mse = residual.squaredNorm() / s;
  const Eigen::MatrixXd cotangent = (-2.0 / s) * residual;
  loss.gradient = mlp_backward(q, agent.critic, agent.critic_spec, cotangent).params;
  if (penalty != nullptr) {
    if (penalty->gradient.size() != loss.gradient.size()) {
      throw std::invalid_argument("critic_loss: penalty gradient length mismatch");
    }
    loss.penalty = penalty->value;
    loss.gradient.values += penalty->gradient.values;
  }
  return loss;
}

CriticLoss critic_update(AgentRuntime& agent, const Minibatch& batch, const Eigen::VectorXd& targets,
                         const SoftPenalty* penalty) {
  CriticLoss loss = critic_loss(agent, batch, targets, penalty);
  check_finite(loss.total(), "critic loss");
  adam_step(agent.critic, loss.gradient, agent.critic_optimizer);
  return loss;
}

std::vector<bool> slot_mask(const std::vector<int>& agents, const std::vector<ActionSlice>& action_slices,
                            int joint_dim) {
  std::vector<bool> mask(static_cast<std::size_t>(joint_dim), false);
  for (int k : agents) {
    const ActionSlice& s = action_slices.at(static_cast<std::size_t>(k));
    for (int d = 0; d < s.length; ++d) mask.at(static_cast<std::size_t>(s.offset + d)) = true;
  }
  return mask;
}

ActorObjective surrogate_objective(const AgentRuntime& agent, const Minibatch& batch,
                                   const std::vector<bool>& policy_slots) {
  if (agent.centralized) throw std::logic_error("surrogate_objective: agent has a centralized actor");
  const auto joint_dim = batch.joint_actions.rows();
  if (static_cast<Eigen::Index>(policy_slots.size()) != joint_dim || agent.actor_spec.output_dim != joint_dim) {
    throw std::invalid_argument("surrogate_objective: slot mask must cover the joint action");
  }
  const ForwardPass policy = mlp_forward_pass(agent.actor, agent.actor_spec, batch.observations);
  Eigen::MatrixXd actions = batch.joint_actions;
  for (Eigen::Index k = 0; k < joint_dim; ++k) {
    if (policy_slots[static_cast<std::size_t>(k)]) actions.row(k) = policy.output().row(k);
  }
  const CriticThroughActions q = critic_through_actions(agent, batch.observations, actions);
  Eigen::MatrixXd policy_cotangent = Eigen::MatrixXd::Zero(joint_dim, batch.size());
  for (Eigen::Index k = 0; k < joint_dim; ++k) {
    if (policy_slots[static_cast<std::size_t>(k)]) policy_cotangent.row(k) = q.action_gradient.row(k);
  }
  return {q.value, mlp_backward(policy, agent.actor, agent.actor_spec, policy_cotangent).params};
}

ActorObjective centralized_objective(const AgentRuntime& agent, const ObservationLayout& layout,
                                     const Minibatch& batch) {
  if (!agent.centralized) throw std::logic_error("centralized_objective: agent has a surrogate actor");
  const auto i = static_cast<std::size_t>(agent.index);
  const Eigen::MatrixXd own_obs = batch.observations.middleRows(layout.offsets.at(i), layout.dims.at(i));
  const ForwardPass policy = mlp_forward_pass(agent.actor, agent.actor_spec, own_obs);
  Eigen::MatrixXd actions = batch.joint_actions;
  actions.middleRows(agent.own_action.offset, agent.own_action.length) = policy.output();
  const CriticThroughActions q = critic_through_actions(agent, batch.observations, actions);
  const Eigen::MatrixXd policy_cotangent =
      q.action_gradient.middleRows(agent.own_action.offset, agent.own_action.length);
  return {q.value, mlp_backward(policy, agent.actor, agent.actor_spec, policy_cotangent).params};
}

namespace {

double ascend(AgentRuntime& agent, const ActorObjective& objective, AdamState& optimizer) {
  check_finite(objective.value, "actor objective");
  const ParamVector descent_direction(-objective.gradient.values);
  adam_step(agent.actor, descent_direction, optimizer);
  return objective.value;
}

}  // namespace

double actor_update_surrogate(AgentRuntime& agent, const Minibatch& batch) {
  const std::vector<bool> all(static_cast<std::size_t>(batch.joint_actions.rows()), true);
  return ascend(agent, surrogate_objective(agent, batch, all), agent.actor_optimizer);
}

double actor_update_centralized(AgentRuntime& agent, const ObservationLayout& layout, const Minibatch& batch) {
  return ascend(agent, centralized_objective(agent, layout, batch), agent.actor_optimizer);
}

MixedObjectives actor_update_mixed(AgentRuntime& agent, const Minibatch& batch, const TeamAssignment& teams,
                                   const std::vector<ActionSlice>& action_slices) {
  const int joint_dim = static_cast<int>(batch.joint_actions.rows());
  MixedObjectives out;
  const std::vector<bool> team_slots = slot_mask(teams.teammates(agent.index), action_slices, joint_dim);
  out.team = ascend(agent, surrogate_objective(agent, batch, team_slots), agent.actor_optimizer);

  const std::vector<int> adversaries = teams.adversaries(agent.index);
  if (adversaries.empty()) return out;
  const std::vector<bool> adversary_slots = slot_mask(adversaries, action_slices, joint_dim);
  const ActorObjective adv = surrogate_objective(agent, batch, adversary_slots);
  check_finite(adv.value, "adversary objective");
  adam_step(agent.actor, adv.gradient, agent.adversary_actor_optimizer);
  out.adversary = adv.value;
  return out;
}

void update_targets(AgentRuntime& agent, double tau) {
  agent.actor_target = soft_update(agent.actor_target, agent.actor, tau);
  agent.critic_target = soft_update(agent.critic_target, agent.critic, tau);
}

}  // namespace dmaddpg
