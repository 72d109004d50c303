#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dmaddpg/agents.hpp"
#include "dmaddpg/audit.hpp"
#include "dmaddpg/comms.hpp"
#include "dmaddpg/env.hpp"

namespace dmaddpg {

struct TrainerConfig {
  Algorithm algorithm = Algorithm::decentralized;
  Setting setting = Setting::cooperative;
  double gamma = 0.95;
  double tau = 0.01;
  int minibatch_size = 256;
  int learning_interval = 100;
  std::size_t warmup = kDefaultWarmup;
  std::int64_t total_steps = 20'000;
  NoiseSpec noise{0.3, 0.05, 10'000};
  ConsensusConfig consensus;
  AgentHyper agent;
  std::int64_t eval_interval = 1000;
  int eval_episodes = 100;

  void validate() const;
};

// Root-seeded stream labels; every random consumer draws from its own stream.
//   "env"              environment resets during training
//   "agent<i>/init"    network initialization of agent i
//   "agent<i>/noise"   exploration noise of agent i
//   "agent<i>/sample"  minibatch sampling of agent i
//   "eval"             evaluation episodes (re-created at every evaluation)
std::string stream_label(const std::string& consumer, int agent = -1);

// Per-agent and per-team metrics at one evaluation point.
struct MetricsRow {
  std::int64_t step = 0;
  std::string algorithm;
  std::string agent_or_team;
  double mean_eval_score = 0.0;
  std::optional<double> critic_loss;
  std::optional<double> actor_objective;
  std::optional<double> consensus_penalty;
};

inline constexpr const char* kMetricsHeader =
    "step,algorithm,agent_or_team,mean_eval_score,critic_loss,actor_objective,consensus_penalty";
std::string format_metrics_row(const MetricsRow& row);

// Acting rule used during evaluation: (agent index, observation) -> action.
using Policy = std::function<Action(int agent, const Eigen::VectorXd& observation)>;

struct EvaluationResult {
  std::vector<std::vector<double>> episode_returns;  // [episode][agent]
  std::vector<double> mean_per_agent;
  double mean_score = 0.0;  // mean over agents of mean_per_agent
};

// Undiscounted episode returns of `policy` over n_episodes fresh episodes.
EvaluationResult evaluate(const Policy& policy, const EnvConfig& env, int n_episodes, Rng& rng);

// Deterministic (noise-free) policy of trained agents.
Policy greedy_policy(const std::vector<AgentRuntime>& agents);
// Independent uniform actions in [-1, 1]^2.
Policy uniform_random_policy(Rng& rng);

struct LastUpdate {
  std::optional<double> critic_loss;
  std::optional<double> actor_objective;
  std::optional<double> consensus_penalty;
};

// Runs the full act / store / learn loop for one of the four algorithms.
class Trainer {
 public:
  Trainer(TrainerConfig config, EnvConfig env, std::optional<CommSchedule> comm, std::uint64_t seed);

  using MetricsSink = std::function<void(const std::vector<MetricsRow>&)>;
  using UpdateHook = std::function<void(std::int64_t step, const std::vector<AgentRuntime>& agents)>;

  // Advances one environment step, learning when the interval is reached.
  // Throws NumericalError (with the step) on a non-finite parameter.
  void step();

  // Runs until total_steps, emitting metrics at step 0 (unless resumed), at
  // every eval_interval and at the final step.
  void run(const MetricsSink& sink);

  std::vector<MetricsRow> evaluation_rows();

  void set_update_hook(UpdateHook hook) { update_hook_ = std::move(hook); }

  std::int64_t current_step() const { return step_; }
  const std::vector<AgentRuntime>& agents() const { return agents_; }
  std::vector<AgentRuntime>& mutable_agents() { return agents_; }
  const TrainerConfig& config() const { return config_; }
  const EnvConfig& env_config() const { return env_.config(); }
  const TeamAssignment& teams() const { return teams_; }
  const AccessAudit& audit() const { return audit_; }
  const std::vector<LastUpdate>& last_updates() const { return last_; }
  std::int64_t learning_updates() const { return updates_; }

  // Complete training state (parameters, optimizers, buffers, RNG streams,
  // world state). Resuming from it continues bit-identically.
  void save_checkpoint(const std::filesystem::path& dir, const std::string& config_hash) const;
  void load_checkpoint(const std::filesystem::path& dir, const std::string& expected_config_hash);

 private:
  bool decentralized() const { return config_.algorithm != Algorithm::maddpg; }
  void learn();
  void check_finite_parameters() const;

  const Eigen::VectorXd& observation(int reader, int owner);
  double reward(int reader, int owner, const StepResult& r);
  const ParamVector& actor_target_of(int reader, int owner);
  const ParamVector& critic_of(int reader, int owner, const std::vector<ParamVector>& snapshot);
  // What agent i stores: its own observation, or the joint one for MADDPG.
  Eigen::VectorXd stored_observation(int agent, const std::vector<Eigen::VectorXd>& obs);

  TrainerConfig config_;
  Environment env_;
  std::optional<CommSchedule> comm_;
  std::uint64_t seed_;
  TeamAssignment teams_;
  ObservationLayout layout_;
  std::vector<ActionSlice> slices_;
  std::vector<AgentRuntime> agents_;
  Rng env_rng_;
  std::vector<Rng> noise_rngs_;
  std::vector<Rng> sample_rngs_;
  std::int64_t step_ = 0;
  std::int64_t updates_ = 0;
  std::vector<LastUpdate> last_;
  AccessAudit audit_;
  UpdateHook update_hook_;
};

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

}  // namespace dmaddpg
