#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmaddpg/agents.hpp"
#include "dmaddpg/comms.hpp"
#include "dmaddpg/env.hpp"
#include "dmaddpg/trainer.hpp"

namespace dmaddpg {

enum class CommTopology { full, one_vs_n, ring, identity, file };

std::string to_string(CommTopology t);
CommTopology topology_from_string(const std::string& name);

// One experiment. For the adversary scenario n_agents counts the adversary
// (agent 0) together with the good agents, so 1-vs-2 is n_agents = 3.
struct ExperimentConfig {
  std::string name = "run";
  Scenario scenario = Scenario::spread;
  int n_agents = 2;
  Algorithm algorithm = Algorithm::decentralized;
  CommTopology comm_topology = CommTopology::full;
  std::string comm_file;
  double eta = 0.001;
  double zeta = 0.1;
  double denom_floor = 1e-8;
  std::int64_t total_steps = 20'000;
  std::int64_t eval_interval = 1000;
  int eval_episodes = 100;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/run";

  double gamma = 0.95;
  double tau = 0.01;
  int minibatch_size = 256;
  int learning_interval = 100;
  std::size_t warmup = kDefaultWarmup;
  std::size_t buffer_capacity = kDefaultReplayCapacity;
  std::vector<int> hidden_dims = kDeskScaleHidden;
  double actor_lr = kActorLearningRate;
  double critic_lr = kCriticLearningRate;
  double sigma_initial = 0.3;
  double sigma_final = 0.05;
  // 0 selects half of total_steps.
  std::int64_t noise_decay_steps = 0;
  int episode_length = 25;
  bool checkpoints = true;

  // Throws std::invalid_argument on an inconsistent combination, e.g. a
  // one_vs_n network outside the adversary scenario.
  void validate() const;

  Setting setting() const { return scenario == Scenario::adversary ? Setting::mixed : Setting::cooperative; }
  EnvConfig env_config() const;
  TrainerConfig trainer_config() const;
  // Empty for maddpg and decentralized.
  std::optional<CommSchedule> comm_schedule() const;
  CommMatrix comm_matrix() const;
};

// Ordered key/value view. output_dir is included; content_hash skips it.
std::vector<std::pair<std::string, std::string>> to_key_values(const ExperimentConfig& c);
// Throws std::invalid_argument for unknown keys or unparsable values.
void apply_key_value(ExperimentConfig& c, const std::string& key, const std::string& value);

// Flat key=value text, one key per line, '#' starts a comment.
std::map<std::string, std::string> parse_key_value_text(const std::string& text);
ExperimentConfig load_config_text(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base = {});
std::string config_snapshot(const ExperimentConfig& c);

// Git blob-style SHA-1 (hex) of the snapshot without output_dir.
std::string content_hash(const ExperimentConfig& c);

// Named desk-scale presets: spread2, spread3, adversary1v1, adversary1v2.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Relative output directories are placed under $DMADDPG_OUTPUT_ROOT when set.
std::filesystem::path resolve_output_dir(const ExperimentConfig& c);

struct RunRecord {
  ExperimentConfig config;
  std::filesystem::path output_dir;
  std::filesystem::path config_snapshot_path;
  std::filesystem::path metrics_path;
  std::vector<std::filesystem::path> checkpoint_paths;
  double wall_clock_seconds = 0.0;
  std::string config_hash;
  bool failed = false;
  std::optional<std::int64_t> failure_step;
  std::string failure_message;
  bool resumed = false;
  std::int64_t resumed_from_step = 0;
};

struct RunOptions {
  // Continue from <output_dir>/checkpoint when it exists.
  bool resume = false;
  // Stop (as if interrupted) once this many steps have run; for testing resume.
  std::optional<std::int64_t> stop_after_step;
};

// Trains, evaluates and writes config.txt, metrics.csv, checkpoint/ and
// run_record.txt into the output directory.
RunRecord run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

void write_run_record(const RunRecord& record);

struct ComparisonTable {
  std::vector<std::string> columns;  // one per run, in input order
  std::vector<std::int64_t> steps;
  std::vector<std::vector<double>> scores;  // [step][column]
};

// Step-aligned score table over runs that share scenario and agent count.
// Runs are identified by output directory; rows are taken from the given
// agent_or_team key. Throws std::invalid_argument on mismatched runs or grids.
ComparisonTable compare_runs(const std::vector<std::filesystem::path>& run_dirs, const std::string& key = "team0");
void write_comparison_csv(std::ostream& out, const ComparisonTable& table);

struct MetricsCsvRow {
  std::int64_t step = 0;
  std::string algorithm;
  std::string agent_or_team;
  double mean_eval_score = 0.0;
};
std::vector<MetricsCsvRow> read_metrics_csv(const std::filesystem::path& path);

}  // namespace dmaddpg
