#include "dmaddpg/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dmaddpg/binary_io.hpp"
#include "dmaddpg/errors.hpp"
#include "dmaddpg/format.hpp"

namespace dmaddpg {

void TrainerConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("TrainerConfig: gamma must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("TrainerConfig: tau must lie in (0, 1]");
  if (minibatch_size < 1) throw std::invalid_argument("TrainerConfig: minibatch_size must be positive");
  if (learning_interval < 1) throw std::invalid_argument("TrainerConfig: learning_interval must be positive");
  if (total_steps < 0) throw std::invalid_argument("TrainerConfig: total_steps must be non-negative");
  if (eval_interval < 1) throw std::invalid_argument("TrainerConfig: eval_interval must be positive");
  if (eval_episodes < 1) throw std::invalid_argument("TrainerConfig: eval_episodes must be positive");
  if (warmup < 1) throw std::invalid_argument("TrainerConfig: warmup must be positive");
  noise.validate();
  consensus.validate();
  for (int h : agent.hidden_dims) {
    if (h < 1) throw std::invalid_argument("TrainerConfig: hidden dims must be positive");
  }
}

std::string stream_label(const std::string& consumer, int agent) {
  return agent < 0 ? consumer : "agent" + std::to_string(agent) + "/" + consumer;
}

std::string format_metrics_row(const MetricsRow& row) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::ostringstream out;
  out << row.step << ',' << row.algorithm << ',' << row.agent_or_team << ',' << format_double(row.mean_eval_score)
      << ',' << opt(row.critic_loss) << ',' << opt(row.actor_objective) << ',' << opt(row.consensus_penalty);
  return out.str();
}

EvaluationResult evaluate(const Policy& policy, const EnvConfig& env_config, int n_episodes, Rng& rng) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate: need at least one episode");
  Environment env(env_config);
  const auto n = static_cast<std::size_t>(env_config.n_agents);
  EvaluationResult result;
  result.mean_per_agent.assign(n, 0.0);
  std::vector<Action> actions(n);
  for (int e = 0; e < n_episodes; ++e) {
    env.reset(rng);
    std::vector<double> returns(n, 0.0);
    bool done = false;
    while (!done) {
      for (std::size_t i = 0; i < n; ++i) actions[i] = policy(static_cast<int>(i), env.observations()[i]);
      const StepResult r = env.step(actions);
      for (std::size_t i = 0; i < n; ++i) returns[i] += r.rewards[i];
      done = r.done;
    }
    for (std::size_t i = 0; i < n; ++i) result.mean_per_agent[i] += returns[i];
    result.episode_returns.push_back(std::move(returns));
  }
  for (double& m : result.mean_per_agent) m /= static_cast<double>(n_episodes);
  for (double m : result.mean_per_agent) result.mean_score += m;
  result.mean_score /= static_cast<double>(n);
  return result;
}

Policy greedy_policy(const std::vector<AgentRuntime>& agents) {
  return [&agents](int i, const Eigen::VectorXd& obs) {
    return select_action(agents[static_cast<std::size_t>(i)], obs, Vec2::Zero());
  };
}

Policy uniform_random_policy(Rng& rng) {
  return [&rng](int, const Eigen::VectorXd&) {
    const double x = rng.uniform(-1.0, 1.0);
    const double y = rng.uniform(-1.0, 1.0);
    return Action(x, y);
  };
}

Trainer::Trainer(TrainerConfig config, EnvConfig env, std::optional<CommSchedule> comm, std::uint64_t seed)
    : config_(std::move(config)),
      env_(env),
      comm_(std::move(comm)),
      seed_(seed),
      layout_(ObservationLayout::from_env(env)),
      env_rng_(Rng::stream(seed, stream_label("env"))),
      audit_(env.n_agents) {
  config_.validate();
  const int n = env.n_agents;
  const bool networked =
      config_.algorithm == Algorithm::hard_consensus || config_.algorithm == Algorithm::soft_consensus;
  if (networked) {
    if (!comm_) throw std::invalid_argument("Trainer: networked algorithms need a communication matrix");
    if ((*comm_)(0).n_agents() != n) throw std::invalid_argument("Trainer: communication matrix size != n_agents");
  }
  teams_ = config_.setting == Setting::mixed && env.scenario == Scenario::adversary ? TeamAssignment::one_vs_rest(n)
                                                                                     : TeamAssignment::single_team(n);
  const int joint_dim = env.joint_action_dim();
  for (int i = 0; i < n; ++i) slices_.push_back(ActionSlice{2 * i, 2});
  for (int i = 0; i < n; ++i) {
    AgentShape shape;
    shape.index = i;
    shape.centralized = !decentralized();
    shape.own_action = slices_[static_cast<std::size_t>(i)];
    shape.actor_input_dim = observation_dim(env, i);
    shape.actor_output_dim = decentralized() ? joint_dim : 2;
    shape.critic_input_dim = (decentralized() ? shape.actor_input_dim : layout_.total()) + joint_dim;
    Rng init = Rng::stream(seed, stream_label("init", i));
    agents_.push_back(make_agent(shape, config_.agent, init));
    noise_rngs_.push_back(Rng::stream(seed, stream_label("noise", i)));
    sample_rngs_.push_back(Rng::stream(seed, stream_label("sample", i)));
  }
  last_.resize(static_cast<std::size_t>(n));
  env_.reset(env_rng_);
}

const Eigen::VectorXd& Trainer::observation(int reader, int owner) {
  audit_.record(reader, owner, AccessKind::observation);
  return env_.observations()[static_cast<std::size_t>(owner)];
}

double Trainer::reward(int reader, int owner, const StepResult& r) {
  audit_.record(reader, owner, AccessKind::reward);
  return r.rewards[static_cast<std::size_t>(owner)];
}

const ParamVector& Trainer::actor_target_of(int reader, int owner) {
  audit_.record(reader, owner, AccessKind::actor_params);
  return agents_[static_cast<std::size_t>(owner)].actor_target;
}

const ParamVector& Trainer::critic_of(int reader, int owner, const std::vector<ParamVector>& snapshot) {
  audit_.record(reader, owner, AccessKind::critic_params);
  return snapshot[static_cast<std::size_t>(owner)];
}

Eigen::VectorXd Trainer::stored_observation(int agent, const std::vector<Eigen::VectorXd>& obs) {
  auto read = [&](int owner) -> const Eigen::VectorXd& {
    audit_.record(agent, owner, AccessKind::observation);
    return obs[static_cast<std::size_t>(owner)];
  };
  if (decentralized()) return read(agent);
  Eigen::VectorXd x(layout_.total());
  for (int k = 0; k < env_.config().n_agents; ++k) {
    x.segment(layout_.offsets[static_cast<std::size_t>(k)], layout_.dims[static_cast<std::size_t>(k)]) = read(k);
  }
  return x;
}

void Trainer::step() {
  const int n = env_.config().n_agents;
  const double sigma = config_.noise.sigma(step_);
  std::vector<Action> actions(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng& rng = noise_rngs_[static_cast<std::size_t>(i)];
    const double nx = sigma * rng.normal();
    const double ny = sigma * rng.normal();
    actions[static_cast<std::size_t>(i)] = select_action(agents_[static_cast<std::size_t>(i)], observation(i, i), Vec2(nx, ny));
  }
  const std::vector<Eigen::VectorXd> previous = env_.observations();
  const StepResult r = env_.step(actions);
  Eigen::VectorXd joint(2 * n);
  for (int i = 0; i < n; ++i) joint.segment<2>(2 * i) = actions[static_cast<std::size_t>(i)];
  for (int i = 0; i < n; ++i) {
    Transition t;
    t.local_observation = stored_observation(i, previous);
    t.joint_action = joint;
    t.local_reward = reward(i, i, r);
    t.next_local_observation = stored_observation(i, r.observations);
    agents_[static_cast<std::size_t>(i)].buffer.push(t);
  }
  if (r.done) env_.reset(env_rng_);
  ++step_;

  if (step_ % config_.learning_interval == 0) {
    bool ready = true;
    for (const AgentRuntime& a : agents_) ready = ready && a.buffer.size() >= config_.warmup;
    if (!ready) return;
    try {
      learn();
    } catch (const NumericalError& e) {
      if (e.step() >= 0) throw;
      throw NumericalError(std::string(e.what()) + " at step " + std::to_string(step_), step_);
    }
  }
}

void Trainer::learn() {
  const int n = env_.config().n_agents;
  const auto un = static_cast<std::size_t>(n);
  std::vector<Minibatch> batches;
  batches.reserve(un);
  for (std::size_t i = 0; i < un; ++i) {
    batches.push_back(agents_[i].buffer.sample_batch(static_cast<std::size_t>(config_.minibatch_size), sample_rngs_[i]));
  }

  std::vector<Eigen::VectorXd> targets(un);
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (decentralized()) {
      targets[ui] = critic_target_decentralized(agents_[ui], batches[ui], config_.gamma);
    } else {
      std::vector<TargetPolicy> policies;
      for (int k = 0; k < n; ++k) {
        const AgentRuntime& other = agents_[static_cast<std::size_t>(k)];
        policies.push_back(TargetPolicy{&other.actor_spec, &actor_target_of(i, k), slices_[static_cast<std::size_t>(k)]});
      }
      targets[ui] = critic_target_centralized(agents_[ui], policies, layout_, batches[ui], config_.gamma);
    }
  }

  std::vector<std::optional<SoftPenalty>> penalties(un);
  if (config_.algorithm == Algorithm::soft_consensus && config_.consensus.zeta > 0.0) {
    std::vector<ParamVector> snapshot;
    for (const AgentRuntime& a : agents_) snapshot.push_back(a.critic);
    const CommMatrix& c = (*comm_)(step_);
    for (int i = 0; i < n; ++i) {
      const std::vector<double> row = c.row(i);
      std::vector<const ParamVector*> neighbours(un, nullptr);
      bool any = false;
      for (int j = 0; j < n; ++j) {
        if (j != i && row[static_cast<std::size_t>(j)] > 0.0) {
          neighbours[static_cast<std::size_t>(j)] = &critic_of(i, j, snapshot);
          any = true;
        }
      }
      if (!any) continue;
      penalties[static_cast<std::size_t>(i)] = soft_penalty(agents_[static_cast<std::size_t>(i)].critic, neighbours, row,
                                                            config_.consensus.zeta, config_.consensus.denom_floor, i);
    }
  }

  for (std::size_t i = 0; i < un; ++i) {
    const SoftPenalty* p = penalties[i] ? &*penalties[i] : nullptr;
    const CriticLoss loss = critic_update(agents_[i], batches[i], targets[i], p);
    last_[i].critic_loss = loss.mse;
    last_[i].consensus_penalty = p ? std::optional<double>(loss.penalty) : std::nullopt;
  }

  for (std::size_t i = 0; i < un; ++i) {
    AgentRuntime& a = agents_[i];
    if (!decentralized()) {
      last_[i].actor_objective = actor_update_centralized(a, layout_, batches[i]);
    } else if (config_.setting == Setting::mixed) {
      last_[i].actor_objective = actor_update_mixed(a, batches[i], teams_, slices_).team;
    } else {
      last_[i].actor_objective = actor_update_surrogate(a, batches[i]);
    }
  }

  for (AgentRuntime& a : agents_) update_targets(a, config_.tau);

  if (config_.algorithm == Algorithm::hard_consensus) {
    std::vector<ParamVector> snapshot;
    for (const AgentRuntime& a : agents_) snapshot.push_back(a.critic);
    const CommMatrix& c = (*comm_)(step_);
    for (int i = 0; i < n; ++i) {
      agents_[static_cast<std::size_t>(i)].critic =
          consensus_row(c, i, [&](int j) -> const ParamVector& { return critic_of(i, j, snapshot); });
    }
  }

  ++updates_;
  check_finite_parameters();
  if (update_hook_) update_hook_(step_, agents_);
}

void Trainer::check_finite_parameters() const {
  for (const AgentRuntime& a : agents_) {
    if (!a.actor.all_finite() || !a.critic.all_finite() || !a.actor_target.all_finite() ||
        !a.critic_target.all_finite()) {
      throw NumericalError("non-finite parameters in agent " + std::to_string(a.index) + " at step " +
                               std::to_string(step_),
                           step_);
    }
  }
}

std::vector<MetricsRow> Trainer::evaluation_rows() {
  Rng eval_rng = Rng::stream(seed_, stream_label("eval"));
  const EvaluationResult ev = evaluate(greedy_policy(agents_), env_.config(), config_.eval_episodes, eval_rng);
  const std::string algo = to_string(config_.algorithm);
  std::vector<MetricsRow> rows;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    rows.push_back(MetricsRow{step_, algo, "agent" + std::to_string(i), ev.mean_per_agent[i], last_[i].critic_loss,
                              last_[i].actor_objective, last_[i].consensus_penalty});
  }
  // Team rows average the member rows; optional fields only when all members have them.
  for (int t = 0; t <= *std::max_element(teams_.team_of.begin(), teams_.team_of.end()); ++t) {
    const std::vector<int> members = teams_.members(t);
    if (members.empty()) continue;
    MetricsRow row{step_, algo, "team" + std::to_string(t), 0.0, {}, {}, {}};
    auto average = [&](std::optional<double> LastUpdate::*field) -> std::optional<double> {
      double sum = 0.0;
      for (int m : members) {
        const auto& v = last_[static_cast<std::size_t>(m)].*field;
        if (!v) return std::nullopt;
        sum += *v;
      }
      return sum / static_cast<double>(members.size());
    };
    for (int m : members) row.mean_eval_score += ev.mean_per_agent[static_cast<std::size_t>(m)];
    row.mean_eval_score /= static_cast<double>(members.size());
    row.critic_loss = average(&LastUpdate::critic_loss);
    row.actor_objective = average(&LastUpdate::actor_objective);
    row.consensus_penalty = average(&LastUpdate::consensus_penalty);
    rows.push_back(std::move(row));
  }
  return rows;
}

void Trainer::run(const MetricsSink& sink) {
  if (step_ == 0) sink(evaluation_rows());
  while (step_ < config_.total_steps) {
    step();
    if (step_ % config_.eval_interval == 0 || step_ == config_.total_steps) sink(evaluation_rows());
  }
}

namespace {

void write_optional(BinaryWriter& w, const std::optional<double>& v) {
  w.u8(v ? 1 : 0);
  w.f64(v.value_or(0.0));
}

std::optional<double> read_optional(BinaryReader& r) {
  const bool present = r.u8() != 0;
  const double v = r.f64();
  return present ? std::optional<double>(v) : std::nullopt;
}

void write_vec2s(BinaryWriter& w, const std::vector<Vec2>& v) {
  w.u64(v.size());
  for (const Vec2& p : v) {
    w.f64(p.x());
    w.f64(p.y());
  }
}

std::vector<Vec2> read_vec2s(BinaryReader& r) {
  const std::uint64_t n = r.u64();
  if (n > 1'000'000) throw std::runtime_error("checkpoint: implausible entity count");
  std::vector<Vec2> v;
  for (std::uint64_t k = 0; k < n; ++k) {
    const double x = r.f64();
    const double y = r.f64();
    v.emplace_back(x, y);
  }
  return v;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return in;
}

void load_net_into(const std::filesystem::path& p, const MlpSpec& expected, ParamVector& dst) {
  std::ifstream in = open_in(p);
  LoadedNetwork net = load_network(in);
  if (!(net.spec == expected)) throw std::runtime_error("checkpoint: network spec mismatch in " + p.string());
  dst = std::move(net.params);
}

}  // namespace

void Trainer::save_checkpoint(const std::filesystem::path& dir, const std::string& config_hash) const {
  std::filesystem::create_directories(dir);
  for (const AgentRuntime& a : agents_) {
    const std::string prefix = "agent" + std::to_string(a.index) + "_";
    {
      std::ofstream out = open_out(dir / (prefix + "actor.dmnn"));
      save_network(out, a.actor_spec, a.actor);
    }
    {
      std::ofstream out = open_out(dir / (prefix + "actor_target.dmnn"));
      save_network(out, a.actor_spec, a.actor_target);
    }
    {
      std::ofstream out = open_out(dir / (prefix + "critic.dmnn"));
      save_network(out, a.critic_spec, a.critic);
    }
    {
      std::ofstream out = open_out(dir / (prefix + "critic_target.dmnn"));
      save_network(out, a.critic_spec, a.critic_target);
    }
    {
      std::ofstream out = open_out(dir / (prefix + "optimizers.bin"));
      save_adam(out, a.actor_optimizer);
      save_adam(out, a.adversary_actor_optimizer);
      save_adam(out, a.critic_optimizer);
    }
    {
      std::ofstream out = open_out(dir / (prefix + "replay.bin"));
      a.buffer.save(out);
    }
  }
  {
    std::ofstream out = open_out(dir / "trainer_state.bin");
    BinaryWriter w(out);
    w.magic("DMTS");
    w.u32(kCheckpointFormatVersion);
    w.i64(step_);
    w.i64(updates_);
    w.str(env_rng_.save_state());
    w.u64(agents_.size());
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      w.str(noise_rngs_[i].save_state());
      w.str(sample_rngs_[i].save_state());
      write_optional(w, last_[i].critic_loss);
      write_optional(w, last_[i].actor_objective);
      write_optional(w, last_[i].consensus_penalty);
    }
    const WorldState& s = env_.state();
    write_vec2s(w, s.agent_positions);
    write_vec2s(w, s.agent_velocities);
    write_vec2s(w, s.landmark_positions);
    w.i64(s.target_index.value_or(-1));
    w.i64(s.step_counter);
  }
  std::ofstream manifest(dir / "manifest.txt");
  manifest << "format_version=" << kCheckpointFormatVersion << '\n'
           << "config_hash=" << config_hash << '\n'
           << "step=" << step_ << '\n'
           << "algorithm=" << to_string(config_.algorithm) << '\n'
           << "n_agents=" << agents_.size() << '\n';
  if (!manifest) throw std::runtime_error("cannot write checkpoint manifest");
}

void Trainer::load_checkpoint(const std::filesystem::path& dir, const std::string& expected_config_hash) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw std::runtime_error("checkpoint manifest missing in " + dir.string());
  std::string line;
  std::string hash;
  std::uint32_t version = 0;
  while (std::getline(manifest, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "format_version") version = static_cast<std::uint32_t>(std::stoul(value));
    if (key == "config_hash") hash = value;
  }
  if (version != kCheckpointFormatVersion) throw std::runtime_error("checkpoint: unsupported format version");
  if (hash != expected_config_hash) throw std::runtime_error("checkpoint: config hash does not match this run");

  for (AgentRuntime& a : agents_) {
    const std::string prefix = "agent" + std::to_string(a.index) + "_";
    load_net_into(dir / (prefix + "actor.dmnn"), a.actor_spec, a.actor);
    load_net_into(dir / (prefix + "actor_target.dmnn"), a.actor_spec, a.actor_target);
    load_net_into(dir / (prefix + "critic.dmnn"), a.critic_spec, a.critic);
    load_net_into(dir / (prefix + "critic_target.dmnn"), a.critic_spec, a.critic_target);
    {
      std::ifstream in = open_in(dir / (prefix + "optimizers.bin"));
      a.actor_optimizer = load_adam(in);
      a.adversary_actor_optimizer = load_adam(in);
      a.critic_optimizer = load_adam(in);
    }
    std::ifstream in = open_in(dir / (prefix + "replay.bin"));
    a.buffer = ReplayBuffer::load(in);
  }
  std::ifstream in = open_in(dir / "trainer_state.bin");
  BinaryReader r(in);
  r.expect_magic("DMTS");
  if (r.u32() != kCheckpointFormatVersion) throw std::runtime_error("checkpoint: unsupported state version");
  step_ = r.i64();
  updates_ = r.i64();
  env_rng_.load_state(r.str());
  if (r.u64() != agents_.size()) throw std::runtime_error("checkpoint: agent count mismatch");
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    noise_rngs_[i].load_state(r.str());
    sample_rngs_[i].load_state(r.str());
    last_[i].critic_loss = read_optional(r);
    last_[i].actor_objective = read_optional(r);
    last_[i].consensus_penalty = read_optional(r);
  }
  WorldState s;
  s.agent_positions = read_vec2s(r);
  s.agent_velocities = read_vec2s(r);
  s.landmark_positions = read_vec2s(r);
  const std::int64_t target = r.i64();
  if (target >= 0) s.target_index = static_cast<int>(target);
  s.step_counter = r.i64();
  env_.restore(std::move(s));
}

}  // namespace dmaddpg
