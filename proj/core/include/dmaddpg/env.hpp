#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dmaddpg/rng.hpp"

namespace dmaddpg {

using Vec2 = Eigen::Vector2d;

enum class Scenario { spread, adversary };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

// Particle-world configuration. For the adversary scenario n_agents counts
// the adversary too: agent 0 is the adversary, agents 1..n_agents-1 are the
// good agents, and there are n_agents-1 landmarks (one of them the target).
// The spread scenario has n_agents landmarks.
struct EnvConfig {
  Scenario scenario = Scenario::spread;
  int n_agents = 2;
  double world_half_width = 1.0;
  double dt = 0.1;
  double damping = 0.25;
  double max_speed = 1.0;
  double collision_threshold = 0.1;
  int max_episode_length = 25;

  void validate() const;
  int landmark_count() const;
  bool is_adversary(int agent) const { return scenario == Scenario::adversary && agent == 0; }
  int action_dim() const { return 2; }
  int joint_action_dim() const { return 2 * n_agents; }

  static EnvConfig spread(int n_agents);
  // n_good good agents plus one adversary.
  static EnvConfig adversary(int n_good);
};

struct WorldState {
  std::vector<Vec2> agent_positions;
  std::vector<Vec2> agent_velocities;
  std::vector<Vec2> landmark_positions;
  std::optional<int> target_index;
  std::int64_t step_counter = 0;

  bool operator==(const WorldState&) const = default;
};

// Relative vectors point from the observing agent to the other entity.
struct AgentObservation {
  Vec2 own_position;
  Vec2 own_velocity;
  std::vector<Vec2> relative_landmark_positions;
  std::vector<Vec2> relative_agent_positions;  // other agents, ascending index
  std::optional<Vec2> relative_target_position;

  // own position, own velocity, landmarks, other agents, then the target
  // vector when present.
  Eigen::VectorXd flatten() const;
};

using Action = Vec2;

int observation_dim(const EnvConfig& config, int agent);

AgentObservation observe(const WorldState& state, int agent, const EnvConfig& config);
std::vector<Eigen::VectorXd> observe_all(const WorldState& state, const EnvConfig& config);

// Shared reward: minus the summed landmark-to-closest-agent distances minus
// the number of agent pairs closer than the collision threshold.
double spread_reward(const WorldState& state, const EnvConfig& config);

// Per-agent rewards in agent order (adversary first).
std::vector<double> adversary_rewards(const WorldState& state, const EnvConfig& config);

std::vector<double> rewards(const WorldState& state, const EnvConfig& config);

struct ResetResult {
  WorldState state;
  std::vector<Eigen::VectorXd> observations;
};

ResetResult env_reset(const EnvConfig& config, Rng& rng);

struct StepResult {
  WorldState state;
  std::vector<Eigen::VectorXd> observations;
  std::vector<double> rewards;
  bool done = false;
};

// Actions are clamped to [-1, 1] per component before integration.
StepResult env_step(const WorldState& state, std::span<const Action> actions, const EnvConfig& config);

// Stateful convenience wrapper around env_reset / env_step.
class Environment {
 public:
  explicit Environment(EnvConfig config);

  const EnvConfig& config() const { return config_; }
  const WorldState& state() const { return state_; }
  const std::vector<Eigen::VectorXd>& observations() const { return observations_; }

  const std::vector<Eigen::VectorXd>& reset(Rng& rng);
  StepResult step(std::span<const Action> actions);
  void restore(WorldState state);

 private:
  EnvConfig config_;
  WorldState state_;
  std::vector<Eigen::VectorXd> observations_;
};

// One CSV row per step: step, then per agent px,py,vx,vy,ax,ay, then per agent
// reward. write_header emits the column names.
class TrajectoryWriter {
 public:
  TrajectoryWriter(std::ostream& out, const EnvConfig& config);
  void write(std::int64_t step, const WorldState& state, std::span<const Action> actions,
             std::span<const double> rewards);

 private:
  std::ostream& out_;
  EnvConfig config_;
};

}  // namespace dmaddpg
