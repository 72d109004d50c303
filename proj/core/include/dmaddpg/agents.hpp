#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmaddpg/comms.hpp"
#include "dmaddpg/env.hpp"
#include "dmaddpg/nn.hpp"
#include "dmaddpg/replay.hpp"

namespace dmaddpg {

enum class Algorithm { maddpg, decentralized, hard_consensus, soft_consensus };
enum class Setting { cooperative, mixed };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Setting s);
Setting setting_from_string(const std::string& name);

// Gaussian exploration noise whose standard deviation decays linearly from
// sigma_initial to sigma_final over decay_steps environment steps.
struct NoiseSpec {
  double sigma_initial = 0.3;
  double sigma_final = 0.05;
  std::int64_t decay_steps = 10'000;

  double sigma(std::int64_t step) const;
  void validate() const;
};

// Partition of agents into teams. Agent i's team slots are its teammates
// (itself included); all remaining agents are its adversaries.
struct TeamAssignment {
  std::vector<int> team_of;

  static TeamAssignment single_team(int n_agents);
  // Agent 0 alone against everyone else.
  static TeamAssignment one_vs_rest(int n_agents);

  int n_agents() const { return static_cast<int>(team_of.size()); }
  int team_count() const;
  std::vector<int> teammates(int agent) const;
  std::vector<int> adversaries(int agent) const;
  std::vector<int> members(int team) const;
  void validate() const;
};

struct ActionSlice {
  int offset = 0;
  int length = 2;
};

// Everything one agent owns. For decentralized variants the actor is a joint
// surrogate policy emitting the whole d_A-dimensional joint action; for
// centralized MADDPG it emits only the agent's own action.
struct AgentRuntime {
  int index = 0;
  bool centralized = false;
  ActionSlice own_action;
  MlpSpec actor_spec;
  MlpSpec critic_spec;
  ParamVector actor;
  ParamVector actor_target;
  ParamVector critic;
  ParamVector critic_target;
  AdamState actor_optimizer;
  // Used by the descent phase of the mixed-setting actor update.
  AdamState adversary_actor_optimizer;
  AdamState critic_optimizer;
  ReplayBuffer buffer;

  int observation_dim() const { return actor_spec.input_dim; }
};

struct AgentShape {
  int index = 0;
  bool centralized = false;
  int actor_input_dim = 0;
  int actor_output_dim = 0;
  int critic_input_dim = 0;
  ActionSlice own_action;
};

struct AgentHyper {
  std::vector<int> hidden_dims = kDeskScaleHidden;
  double actor_learning_rate = kActorLearningRate;
  double critic_learning_rate = kCriticLearningRate;
  std::size_t buffer_capacity = kDefaultReplayCapacity;
};

// Actor: tanh output; critic: scalar identity output; targets start as copies.
AgentRuntime make_agent(const AgentShape& shape, const AgentHyper& hyper, Rng& init_rng);

// Own slice of the actor output plus noise, clamped to [-1, 1].
Action select_action(const AgentRuntime& agent, const Eigen::VectorXd& observation, const Vec2& noise);

// r + gamma * Q'(o', mu'(o')) with the whole next joint action taken from the
// agent's own target surrogate policy.
Eigen::VectorXd critic_target_decentralized(const AgentRuntime& agent, const Minibatch& batch, double gamma);

// Layout of a concatenated joint observation x = (o_1, ..., o_N).
struct ObservationLayout {
  std::vector<int> offsets;
  std::vector<int> dims;

  static ObservationLayout from_env(const EnvConfig& config);
  int total() const { return offsets.empty() ? 0 : offsets.back() + dims.back(); }
};

// Per-agent target actor of every agent, used for the centralized target.
struct TargetPolicy {
  const MlpSpec* spec;
  const ParamVector* params;
  ActionSlice slot;
};

// r + gamma * Q'_i(x', mu'_1(o'_1), ..., mu'_N(o'_N)). Batch observations are
// concatenated joint observations.
Eigen::VectorXd critic_target_centralized(const AgentRuntime& agent, std::span<const TargetPolicy> target_policies,
                                          const ObservationLayout& layout, const Minibatch& batch, double gamma);

// Critic input (o or x stacked over the joint action), one column per sample.
Eigen::MatrixXd critic_inputs(const Eigen::MatrixXd& observations, const Eigen::MatrixXd& joint_actions);

struct CriticLoss {
  double mse = 0.0;
  double penalty = 0.0;
  ParamVector gradient;

  double total() const { return mse + penalty; }
};

// (1/S) sum (y - Q(o, a))^2 plus the optional consensus penalty, with the
// gradient with respect to the critic parameters. Targets are constants.
CriticLoss critic_loss(const AgentRuntime& agent, const Minibatch& batch, const Eigen::VectorXd& targets,
                       const SoftPenalty* penalty = nullptr);

// Evaluates the loss, then applies one Adam step. Returns the pre-step loss.
// Throws NumericalError when the loss is not finite.
CriticLoss critic_update(AgentRuntime& agent, const Minibatch& batch, const Eigen::VectorXd& targets,
                         const SoftPenalty* penalty = nullptr);

struct ActorObjective {
  double value = 0.0;
  ParamVector gradient;  // d value / d actor params
};

// (1/S) sum Q(o, A) where A[k] = mu_theta(o)[k] for action coordinates with
// policy_slots[k] set and the observed joint action otherwise.
ActorObjective surrogate_objective(const AgentRuntime& agent, const Minibatch& batch,
                                   const std::vector<bool>& policy_slots);

// Centralized MADDPG: (1/S) sum Q(x, a_1, .., mu_i(o_i), .., a_N).
ActorObjective centralized_objective(const AgentRuntime& agent, const ObservationLayout& layout,
                                     const Minibatch& batch);

// Gradient ascent through every joint-action slot. Returns the pre-step objective.
double actor_update_surrogate(AgentRuntime& agent, const Minibatch& batch);

double actor_update_centralized(AgentRuntime& agent, const ObservationLayout& layout, const Minibatch& batch);

struct MixedObjectives {
  double team = 0.0;
  std::optional<double> adversary;  // empty when the agent has no adversaries
};

// Ascent on team slots with adversary slots pinned to observed actions, then
// descent on adversary slots with team slots pinned.
MixedObjectives actor_update_mixed(AgentRuntime& agent, const Minibatch& batch, const TeamAssignment& teams,
                                   const std::vector<ActionSlice>& action_slices);

// Coordinate mask over the joint action covering the listed agents' slices.
std::vector<bool> slot_mask(const std::vector<int>& agents, const std::vector<ActionSlice>& action_slices,
                            int joint_dim);

void update_targets(AgentRuntime& agent, double tau);

}  // namespace dmaddpg
