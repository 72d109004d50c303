#include "cli.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "dmaddpg/errors.hpp"
#include "dmaddpg/format.hpp"

extern char** environ;

namespace dmaddpg::cli {

namespace {

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

constexpr FlagSpec kConfigFlags[] = {
    {"--name", "name", "Run name"},
    {"--scenario", "scenario", "spread | adversary"},
    {"--agents", "n_agents", "Number of agents (the adversary counts)"},
    {"--algo", "algorithm", "maddpg | decentralized | hard_consensus | soft_consensus"},
    {"--comm", "comm", "full | one_vs_n | ring | identity | file"},
    {"--comm-file", "comm_file", "Communication matrix file for --comm file"},
    {"--eta", "eta", "Off-diagonal communication mass"},
    {"--zeta", "zeta", "Soft consensus penalty weight"},
    {"--steps", "total_steps", "Total environment steps"},
    {"--eval-interval", "eval_interval", "Steps between evaluations"},
    {"--eval-episodes", "eval_episodes", "Episodes per evaluation"},
    {"--seed", "seed", "Root seed"},
    {"--out", "output_dir", "Output directory"},
    {"--gamma", "gamma", "Discount factor"},
    {"--tau", "tau", "Target network rate"},
    {"--batch", "minibatch_size", "Minibatch size"},
    {"--learning-interval", "learning_interval", "Steps between learning updates"},
    {"--warmup", "warmup", "Transitions required before learning"},
    {"--buffer", "buffer_capacity", "Replay capacity"},
    {"--hidden", "hidden_dims", "Hidden widths, comma separated"},
    {"--actor-lr", "actor_lr", "Actor learning rate"},
    {"--critic-lr", "critic_lr", "Critic learning rate"},
    {"--sigma-initial", "sigma_initial", "Initial exploration noise"},
    {"--sigma-final", "sigma_final", "Final exploration noise"},
    {"--noise-decay-steps", "noise_decay_steps", "Noise annealing horizon (0: half the run)"},
    {"--episode-length", "episode_length", "Steps per episode"},
    {"--checkpoints", "checkpoints", "Write checkpoints (true/false)"},
};

// Holds the raw strings of config flags until all sources are known.
struct ConfigOptions {
  std::string preset;
  std::string config_file;
  std::map<std::string, std::string> values;
  std::vector<std::pair<const char*, CLI::Option*>> options;

  void attach(CLI::App& app) {
    app.add_option("--preset", preset, "Start from a named preset");
    app.add_option("--config", config_file, "key=value config file");
    for (const FlagSpec& f : kConfigFlags) {
      options.emplace_back(f.key, app.add_option(f.flag, values[f.key], f.help));
    }
  }

  ExperimentConfig build() const {
    ExperimentConfig c = preset.empty() ? ExperimentConfig{} : dmaddpg::preset(preset);
    if (!config_file.empty()) c = load_config_file(config_file, c);
    for (const auto& [key, option] : options) {
      if (option->count() > 0) apply_key_value(c, key, values.at(key));
    }
    c.validate();
    return c;
  }
};

void parse_args(CLI::App& app, std::vector<std::string> args) {
  std::reverse(args.begin(), args.end());
  app.parse(args);
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + format_double(v[k]);
  return s;
}

void print_evaluation(std::ostream& out, const EvaluationResult& r) {
  out << "mean_per_agent=" << join(r.mean_per_agent) << '\n';
  out << "mean_score=" << format_double(r.mean_score) << '\n';
}

int cmd_train(const ConfigOptions& opts, bool resume, std::ostream& out, std::ostream& err) {
  const ExperimentConfig config = opts.build();
  RunOptions run_options;
  run_options.resume = resume;
  const RunRecord record = run_experiment(config, run_options);
  out << "output_dir=" << record.output_dir.string() << '\n';
  out << "config_hash=" << record.config_hash << '\n';
  out << "wall_clock_seconds=" << format_double(record.wall_clock_seconds) << '\n';
  if (record.failed) {
    err << "training failed at step " << record.failure_step.value_or(-1) << ": " << record.failure_message << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_evaluate(const ConfigOptions& opts, const std::string& run_dir, bool random, int episodes,
                 std::uint64_t eval_seed, std::ostream& out) {
  if (random) {
    const ExperimentConfig config = run_dir.empty() ? opts.build()
                                                    : load_config_file(std::filesystem::path(run_dir) / "config.txt");
    Rng policy_rng = Rng::stream(eval_seed, "baseline/policy");
    Rng env_rng = Rng::stream(eval_seed, "baseline/env");
    print_evaluation(out, evaluate(uniform_random_policy(policy_rng), config.env_config(),
                                   episodes > 0 ? episodes : config.eval_episodes, env_rng));
    return kExitOk;
  }
  if (run_dir.empty()) throw std::invalid_argument("evaluate needs --run DIR or --random");
  const std::filesystem::path dir(run_dir);
  const ExperimentConfig config = load_config_file(dir / "config.txt");
  Trainer trainer(config.trainer_config(), config.env_config(), config.comm_schedule(), config.seed);
  trainer.load_checkpoint(dir / "checkpoint", content_hash(config));
  Rng rng = Rng::stream(eval_seed, stream_label("eval"));
  out << "step=" << trainer.current_step() << '\n';
  print_evaluation(out, evaluate(greedy_policy(trainer.agents()), config.env_config(),
                                 episodes > 0 ? episodes : config.eval_episodes, rng));
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& runs, const std::string& key, const std::string& output,
                std::ostream& out) {
  std::vector<std::filesystem::path> dirs(runs.begin(), runs.end());
  const ComparisonTable table = compare_runs(dirs, key);
  if (output.empty()) {
    write_comparison_csv(out, table);
  } else {
    std::ofstream file(output, std::ios::binary);
    write_comparison_csv(file, table);
    if (!file) throw std::runtime_error("cannot write " + output);
    out << "wrote " << output << '\n';
  }
  return kExitOk;
}

int cmd_validate_comm(const std::string& path, std::ostream& out, std::ostream& err) {
  std::ifstream in(path);
  if (!in) {
    err << "cannot open " << path << '\n';
    return kExitUsage;
  }
  try {
    const CommMatrix m = load_comm_matrix(in);
    out << "ok: " << m.n_agents() << "x" << m.n_agents() << " right-stochastic, max row-sum error "
        << format_double(m.max_row_sum_error()) << '\n';
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    err << "invalid: " << e.what() << '\n';
    return kExitUsage;
  }
}

struct SweepJob {
  ExperimentConfig config;
  std::filesystem::path config_path;
};

int wait_exit_code(pid_t pid) {
  int status = 0;
  if (waitpid(pid, &status, 0) < 0) return kExitUsage;
  return WIFEXITED(status) ? WEXITSTATUS(status) : kExitNumerical;
}

int cmd_sweep(const ConfigOptions& opts, const std::vector<std::string>& algos, const std::vector<std::uint64_t>& seeds,
              int jobs, std::ostream& out, std::ostream& err) {
  const ExperimentConfig base = opts.build();
  const std::filesystem::path root = resolve_output_dir(base);
  std::vector<SweepJob> queue;
  for (const std::string& algo : algos.empty() ? std::vector<std::string>{to_string(base.algorithm)} : algos) {
    for (std::uint64_t seed : seeds.empty() ? std::vector<std::uint64_t>{base.seed} : seeds) {
      SweepJob job{base, {}};
      job.config.algorithm = algorithm_from_string(algo);
      job.config.seed = seed;
      const std::filesystem::path dir = root / (algo + "_seed" + std::to_string(seed));
      job.config.output_dir = std::filesystem::absolute(dir).string();
      job.config.validate();
      std::filesystem::create_directories(dir);
      job.config_path = dir / "sweep_config.txt";
      std::ofstream(job.config_path) << config_snapshot(job.config);
      queue.push_back(std::move(job));
    }
  }

  std::vector<int> codes(queue.size(), kExitOk);
  if (jobs <= 1) {
    for (std::size_t k = 0; k < queue.size(); ++k) {
      const RunRecord r = run_experiment(queue[k].config);
      codes[k] = r.failed ? kExitNumerical : kExitOk;
    }
  } else {
    std::map<pid_t, std::size_t> running;
    std::size_t next = 0;
    while (next < queue.size() || !running.empty()) {
      while (next < queue.size() && static_cast<int>(running.size()) < jobs) {
        std::vector<std::string> argv_s{"dmaddpg", "train", "--config", queue[next].config_path.string()};
        std::vector<char*> argv;
        for (auto& s : argv_s) argv.push_back(s.data());
        argv.push_back(nullptr);
        pid_t pid = 0;
        if (posix_spawn(&pid, "/proc/self/exe", nullptr, nullptr, argv.data(), environ) != 0) {
          err << "failed to start run " << queue[next].config.output_dir << '\n';
          codes[next] = kExitUsage;
        } else {
          running[pid] = next;
        }
        ++next;
      }
      if (running.empty()) continue;
      int status = 0;
      const pid_t done = waitpid(-1, &status, 0);
      if (done < 0) break;
      auto it = running.find(done);
      if (it == running.end()) continue;
      codes[it->second] = WIFEXITED(status) ? WEXITSTATUS(status) : kExitNumerical;
      running.erase(it);
    }
    for (const auto& [pid, index] : running) codes[index] = wait_exit_code(pid);
  }

  int worst = kExitOk;
  for (std::size_t k = 0; k < queue.size(); ++k) {
    out << queue[k].config.output_dir << " exit=" << codes[k] << '\n';
    worst = std::max(worst, codes[k]);
  }
  return worst;
}

}  // namespace

ExperimentConfig parse_train_cli(const std::vector<std::string>& args) {
  CLI::App app{"train", "train"};
  ConfigOptions opts;
  opts.attach(app);
  try {
    parse_args(app, args);
  } catch (const CLI::ParseError& e) {
    throw std::invalid_argument(e.what());
  }
  return opts.build();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Networked multi-agent actor-critic training", "dmaddpg"};
  app.require_subcommand(1);

  ConfigOptions train_opts;
  bool resume = false;
  auto* train = app.add_subcommand("train", "Train one configuration");
  train_opts.attach(*train);
  train->add_flag("--resume", resume, "Continue from the checkpoint in the output directory");

  ConfigOptions eval_opts;
  std::string run_dir;
  bool random = false;
  int episodes = 0;
  std::uint64_t eval_seed = 0;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a trained run or the random baseline");
  eval_opts.attach(*evaluate_cmd);
  evaluate_cmd->add_option("--run", run_dir, "Run directory with config.txt and checkpoint/");
  evaluate_cmd->add_flag("--random", random, "Evaluate uniform random actions instead");
  evaluate_cmd->add_option("--episodes", episodes, "Episodes (default: eval_episodes)");
  evaluate_cmd->add_option("--eval-seed", eval_seed, "Seed of the evaluation episodes");

  std::vector<std::string> runs;
  std::string key = "team0";
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Step-aligned score table across runs");
  compare->add_option("runs", runs, "Run directories")->required();
  compare->add_option("--key", key, "agent_or_team column to compare");
  compare->add_option("--output", compare_out, "CSV file (default: stdout)");

  ConfigOptions sweep_opts;
  std::vector<std::string> algos;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Run algorithms x seeds, one process per run");
  sweep_opts.attach(*sweep);
  sweep->add_option("--algos", algos, "Algorithms")->delimiter(',');
  sweep->add_option("--seeds", seeds, "Seeds")->delimiter(',');
  sweep->add_option("--jobs", jobs, "Parallel processes");

  std::string matrix_path;
  auto* validate = app.add_subcommand("validate-comm", "Check a communication matrix file");
  validate->add_option("file", matrix_path, "Matrix file")->required();

  try {
    parse_args(app, args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_opts, resume, out, err);
    if (*evaluate_cmd) return cmd_evaluate(eval_opts, run_dir, random, episodes, eval_seed, out);
    if (*compare) return cmd_compare(runs, key, compare_out, out);
    if (*sweep) return cmd_sweep(sweep_opts, algos, seeds, jobs, out, err);
    if (*validate) return cmd_validate_comm(matrix_path, out, err);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace dmaddpg::cli
