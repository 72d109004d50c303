#include "dmaddpg/env.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "dmaddpg/format.hpp"

namespace dmaddpg {

std::string to_string(Scenario s) { return s == Scenario::spread ? "spread" : "adversary"; }

Scenario scenario_from_string(const std::string& name) {
  if (name == "spread") return Scenario::spread;
  if (name == "adversary") return Scenario::adversary;
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

void EnvConfig::validate() const {
  if (scenario == Scenario::spread && n_agents < 1) throw std::invalid_argument("EnvConfig: need at least one agent");
  if (scenario == Scenario::adversary && n_agents < 2) {
    throw std::invalid_argument("EnvConfig: adversary scenario needs an adversary and at least one good agent");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("EnvConfig: dt must be positive");
  if (!(damping >= 0.0 && damping < 1.0)) throw std::invalid_argument("EnvConfig: damping must lie in [0, 1)");
  if (!(max_speed > 0.0)) throw std::invalid_argument("EnvConfig: max_speed must be positive");
  if (!(collision_threshold > 0.0 && collision_threshold < world_half_width)) {
    throw std::invalid_argument("EnvConfig: collision threshold must lie in (0, world_half_width)");
  }
  if (max_episode_length < 1) throw std::invalid_argument("EnvConfig: max_episode_length must be >= 1");
}

int EnvConfig::landmark_count() const { return scenario == Scenario::spread ? n_agents : n_agents - 1; }

EnvConfig EnvConfig::spread(int n_agents) {
  EnvConfig c;
  c.scenario = Scenario::spread;
  c.n_agents = n_agents;
  return c;
}

EnvConfig EnvConfig::adversary(int n_good) {
  EnvConfig c;
  c.scenario = Scenario::adversary;
  c.n_agents = n_good + 1;
  return c;
}

int observation_dim(const EnvConfig& config, int agent) {
  int dim = 4 + 2 * config.landmark_count() + 2 * (config.n_agents - 1);
  if (config.scenario == Scenario::adversary && !config.is_adversary(agent)) dim += 2;
  return dim;
}

Eigen::VectorXd AgentObservation::flatten() const {
  const auto n = 4 + 2 * (relative_landmark_positions.size() + relative_agent_positions.size()) +
                 (relative_target_position ? 2 : 0);
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  Eigen::Index k = 0;
  auto put = [&](const Vec2& v) {
    out[k++] = v.x();
    out[k++] = v.y();
  };
  put(own_position);
  put(own_velocity);
  for (const Vec2& v : relative_landmark_positions) put(v);
  for (const Vec2& v : relative_agent_positions) put(v);
  if (relative_target_position) put(*relative_target_position);
  return out;
}

AgentObservation observe(const WorldState& state, int agent, const EnvConfig& config) {
  if (agent < 0 || agent >= config.n_agents) throw std::invalid_argument("observe: agent index out of range");
  const Vec2& p = state.agent_positions[static_cast<std::size_t>(agent)];
  AgentObservation obs;
  obs.own_position = p;
  obs.own_velocity = state.agent_velocities[static_cast<std::size_t>(agent)];
  for (const Vec2& l : state.landmark_positions) obs.relative_landmark_positions.push_back(l - p);
  for (int j = 0; j < config.n_agents; ++j) {
    if (j != agent) obs.relative_agent_positions.push_back(state.agent_positions[static_cast<std::size_t>(j)] - p);
  }
  if (config.scenario == Scenario::adversary && !config.is_adversary(agent)) {
    obs.relative_target_position = state.landmark_positions[static_cast<std::size_t>(state.target_index.value())] - p;
  }
  return obs;
}

std::vector<Eigen::VectorXd> observe_all(const WorldState& state, const EnvConfig& config) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(config.n_agents));
  for (int i = 0; i < config.n_agents; ++i) out.push_back(observe(state, i, config).flatten());
  return out;
}

double spread_reward(const WorldState& state, const EnvConfig& config) {
  double distance_term = 0.0;
  for (const Vec2& l : state.landmark_positions) {
    double closest = std::numeric_limits<double>::infinity();
    for (const Vec2& p : state.agent_positions) closest = std::min(closest, (l - p).norm());
    distance_term += closest;
  }
  int collisions = 0;
  const std::size_t n = state.agent_positions.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if ((state.agent_positions[i] - state.agent_positions[j]).norm() < config.collision_threshold) ++collisions;
    }
  }
  return -distance_term - static_cast<double>(collisions);
}

std::vector<double> adversary_rewards(const WorldState& state, const EnvConfig& config) {
  const Vec2& target = state.landmark_positions.at(static_cast<std::size_t>(state.target_index.value()));
  const double adversary_reward = -(target - state.agent_positions[0]).norm();
  double closest_good = std::numeric_limits<double>::infinity();
  for (int j = 1; j < config.n_agents; ++j) {
    closest_good = std::min(closest_good, (target - state.agent_positions[static_cast<std::size_t>(j)]).norm());
  }
  const double good_reward = -closest_good - adversary_reward;
  std::vector<double> out(static_cast<std::size_t>(config.n_agents), good_reward);
  out[0] = adversary_reward;
  return out;
}

std::vector<double> rewards(const WorldState& state, const EnvConfig& config) {
  if (config.scenario == Scenario::spread) {
    return std::vector<double>(static_cast<std::size_t>(config.n_agents), spread_reward(state, config));
  }
  return adversary_rewards(state, config);
}

ResetResult env_reset(const EnvConfig& config, Rng& rng) {
  config.validate();
  const double w = config.world_half_width;
  ResetResult r;
  auto sample = [&] {
    const double x = rng.uniform(-w, w);
    const double y = rng.uniform(-w, w);
    return Vec2(x, y);
  };
  for (int i = 0; i < config.n_agents; ++i) {
    r.state.agent_positions.push_back(sample());
    r.state.agent_velocities.push_back(Vec2::Zero());
  }
  for (int l = 0; l < config.landmark_count(); ++l) r.state.landmark_positions.push_back(sample());
  if (config.scenario == Scenario::adversary) {
    r.state.target_index = static_cast<int>(rng.index(static_cast<std::uint64_t>(config.landmark_count())));
  }
  r.observations = observe_all(r.state, config);
  return r;
}

StepResult env_step(const WorldState& state, std::span<const Action> actions, const EnvConfig& config) {
  if (actions.size() != static_cast<std::size_t>(config.n_agents)) {
    throw std::invalid_argument("env_step: expected " + std::to_string(config.n_agents) + " actions, got " +
                                std::to_string(actions.size()));
  }
  StepResult r;
  r.state = state;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const Vec2 a = actions[i].cwiseMax(-1.0).cwiseMin(1.0);
    Vec2& v = r.state.agent_velocities[i];
    v = v * (1.0 - config.damping) + a * config.dt;
    const double speed = v.norm();
    if (speed > config.max_speed) v *= config.max_speed / speed;
    r.state.agent_positions[i] += v * config.dt;
  }
  r.state.step_counter += 1;
  r.observations = observe_all(r.state, config);
  r.rewards = rewards(r.state, config);
  r.done = r.state.step_counter >= config.max_episode_length;
  return r;
}

Environment::Environment(EnvConfig config) : config_(config) { config_.validate(); }

const std::vector<Eigen::VectorXd>& Environment::reset(Rng& rng) {
  ResetResult r = env_reset(config_, rng);
  state_ = std::move(r.state);
  observations_ = std::move(r.observations);
  return observations_;
}

StepResult Environment::step(std::span<const Action> actions) {
  StepResult r = env_step(state_, actions, config_);
  state_ = r.state;
  observations_ = r.observations;
  return r;
}

void Environment::restore(WorldState state) {
  state_ = std::move(state);
  observations_ = observe_all(state_, config_);
}

TrajectoryWriter::TrajectoryWriter(std::ostream& out, const EnvConfig& config) : out_(out), config_(config) {
  out_ << "step";
  for (int i = 0; i < config_.n_agents; ++i) {
    for (const char* f : {"px", "py", "vx", "vy", "ax", "ay"}) out_ << ',' << f << i;
  }
  for (int i = 0; i < config_.n_agents; ++i) out_ << ",r" << i;
  out_ << '\n';
}

void TrajectoryWriter::write(std::int64_t step, const WorldState& state, std::span<const Action> actions,
                             std::span<const double> rewards) {
  out_ << step;
  for (int i = 0; i < config_.n_agents; ++i) {
    const auto k = static_cast<std::size_t>(i);
    for (double v : {state.agent_positions[k].x(), state.agent_positions[k].y(), state.agent_velocities[k].x(),
                     state.agent_velocities[k].y(), actions[k].x(), actions[k].y()}) {
      out_ << ',' << format_double(v);
    }
  }
  for (double r : rewards) out_ << ',' << format_double(r);
  out_ << '\n';
}

}  // namespace dmaddpg
