#include "dmaddpg/harness.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dmaddpg/errors.hpp"
#include "dmaddpg/format.hpp"

namespace dmaddpg {

std::string to_string(CommTopology t) {
  switch (t) {
    case CommTopology::full:
      return "full";
    case CommTopology::one_vs_n:
      return "one_vs_n";
    case CommTopology::ring:
      return "ring";
    case CommTopology::identity:
      return "identity";
    case CommTopology::file:
      return "file";
  }
  return "unknown";
}

CommTopology topology_from_string(const std::string& name) {
  for (CommTopology t :
       {CommTopology::full, CommTopology::one_vs_n, CommTopology::ring, CommTopology::identity, CommTopology::file}) {
    if (to_string(t) == name) return t;
  }
  throw std::invalid_argument("unknown communication topology '" + name + "'");
}

namespace {

bool networked(Algorithm a) { return a == Algorithm::hard_consensus || a == Algorithm::soft_consensus; }

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* begin = value.data();
  const char* end = begin + value.size();
  const auto result = std::from_chars(begin, end, out);
  if (result.ec != std::errc() || result.ptr != end) {
    throw std::invalid_argument("invalid value '" + value + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument("invalid boolean '" + value + "' for " + key);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<int>(key, item));
  if (out.empty()) throw std::invalid_argument(key + " must list at least one layer width");
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void ExperimentConfig::validate() const {
  env_config().validate();
  trainer_config().validate();
  if (comm_topology == CommTopology::one_vs_n && scenario != Scenario::adversary) {
    throw std::invalid_argument("the one_vs_n communication network requires the adversary scenario");
  }
  if (comm_topology == CommTopology::one_vs_n && n_agents < 3) {
    throw std::invalid_argument("the one_vs_n communication network needs at least 3 agents");
  }
  if (comm_topology == CommTopology::file && comm_file.empty()) {
    throw std::invalid_argument("comm=file requires comm_file");
  }
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in [0, 1]");
  if (networked(algorithm)) {
    if (comm_matrix().n_agents() != n_agents) {
      throw std::invalid_argument("communication matrix size does not match the number of agents");
    }
  }
}

EnvConfig ExperimentConfig::env_config() const {
  EnvConfig e;
  e.scenario = scenario;
  e.n_agents = n_agents;
  e.max_episode_length = episode_length;
  return e;
}

TrainerConfig ExperimentConfig::trainer_config() const {
  TrainerConfig t;
  t.algorithm = algorithm;
  t.setting = setting();
  t.gamma = gamma;
  t.tau = tau;
  t.minibatch_size = minibatch_size;
  t.learning_interval = learning_interval;
  t.warmup = warmup;
  t.total_steps = total_steps;
  t.noise = NoiseSpec{sigma_initial, sigma_final,
                      noise_decay_steps > 0 ? noise_decay_steps : std::max<std::int64_t>(1, total_steps / 2)};
  t.consensus = ConsensusConfig{zeta, eta, denom_floor};
  t.agent.hidden_dims = hidden_dims;
  t.agent.actor_learning_rate = actor_lr;
  t.agent.critic_learning_rate = critic_lr;
  t.agent.buffer_capacity = buffer_capacity;
  t.eval_interval = eval_interval;
  t.eval_episodes = eval_episodes;
  return t;
}

CommMatrix ExperimentConfig::comm_matrix() const {
  if (n_agents == 1 && comm_topology != CommTopology::file) return CommMatrix::identity(1);
  switch (comm_topology) {
    case CommTopology::full:
      return build_cooperative(n_agents, eta);
    case CommTopology::one_vs_n:
      return build_one_vs_n(n_agents, eta);
    case CommTopology::ring:
      return build_ring(n_agents, eta);
    case CommTopology::identity:
      return CommMatrix::identity(n_agents);
    case CommTopology::file:
      return load_comm_matrix_file(comm_file);
  }
  throw std::logic_error("unhandled topology");
}

std::optional<CommSchedule> ExperimentConfig::comm_schedule() const {
  if (!networked(algorithm)) return std::nullopt;
  return constant_schedule(comm_matrix());
}

std::vector<std::pair<std::string, std::string>> to_key_values(const ExperimentConfig& c) {
  return {
      {"name", c.name},
      {"scenario", to_string(c.scenario)},
      {"n_agents", std::to_string(c.n_agents)},
      {"algorithm", to_string(c.algorithm)},
      {"comm", to_string(c.comm_topology)},
      {"comm_file", c.comm_file},
      {"eta", format_double(c.eta)},
      {"zeta", format_double(c.zeta)},
      {"denom_floor", format_double(c.denom_floor)},
      {"total_steps", std::to_string(c.total_steps)},
      {"eval_interval", std::to_string(c.eval_interval)},
      {"eval_episodes", std::to_string(c.eval_episodes)},
      {"seed", std::to_string(c.seed)},
      {"output_dir", c.output_dir},
      {"gamma", format_double(c.gamma)},
      {"tau", format_double(c.tau)},
      {"minibatch_size", std::to_string(c.minibatch_size)},
      {"learning_interval", std::to_string(c.learning_interval)},
      {"warmup", std::to_string(c.warmup)},
      {"buffer_capacity", std::to_string(c.buffer_capacity)},
      {"hidden_dims", join_ints(c.hidden_dims)},
      {"actor_lr", format_double(c.actor_lr)},
      {"critic_lr", format_double(c.critic_lr)},
      {"sigma_initial", format_double(c.sigma_initial)},
      {"sigma_final", format_double(c.sigma_final)},
      {"noise_decay_steps", std::to_string(c.noise_decay_steps)},
      {"episode_length", std::to_string(c.episode_length)},
      {"checkpoints", c.checkpoints ? "true" : "false"},
  };
}

void apply_key_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "name") c.name = value;
  else if (key == "scenario") c.scenario = scenario_from_string(value);
  else if (key == "n_agents") c.n_agents = parse_number<int>(key, value);
  else if (key == "algorithm") c.algorithm = algorithm_from_string(value);
  else if (key == "comm") c.comm_topology = topology_from_string(value);
  else if (key == "comm_file") c.comm_file = value;
  else if (key == "eta") c.eta = parse_number<double>(key, value);
  else if (key == "zeta") c.zeta = parse_number<double>(key, value);
  else if (key == "denom_floor") c.denom_floor = parse_number<double>(key, value);
  else if (key == "total_steps") c.total_steps = parse_number<std::int64_t>(key, value);
  else if (key == "eval_interval") c.eval_interval = parse_number<std::int64_t>(key, value);
  else if (key == "eval_episodes") c.eval_episodes = parse_number<int>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "output_dir") c.output_dir = value;
  else if (key == "gamma") c.gamma = parse_number<double>(key, value);
  else if (key == "tau") c.tau = parse_number<double>(key, value);
  else if (key == "minibatch_size") c.minibatch_size = parse_number<int>(key, value);
  else if (key == "learning_interval") c.learning_interval = parse_number<int>(key, value);
  else if (key == "warmup") c.warmup = parse_number<std::size_t>(key, value);
  else if (key == "buffer_capacity") c.buffer_capacity = parse_number<std::size_t>(key, value);
  else if (key == "hidden_dims") c.hidden_dims = parse_int_list(key, value);
  else if (key == "actor_lr") c.actor_lr = parse_number<double>(key, value);
  else if (key == "critic_lr") c.critic_lr = parse_number<double>(key, value);
  else if (key == "sigma_initial") c.sigma_initial = parse_number<double>(key, value);
  else if (key == "sigma_final") c.sigma_final = parse_number<double>(key, value);
  else if (key == "noise_decay_steps") c.noise_decay_steps = parse_number<std::int64_t>(key, value);
  else if (key == "episode_length") c.episode_length = parse_number<int>(key, value);
  else if (key == "checkpoints") c.checkpoints = parse_bool(key, value);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

std::map<std::string, std::string> parse_key_value_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key=value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

ExperimentConfig load_config_text(const std::string& text, ExperimentConfig base) {
  for (const auto& [k, v] : parse_key_value_text(text)) apply_key_value(base, k, v);
  return base;
}

ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_config_text(buf.str(), std::move(base));
}

std::string config_snapshot(const ExperimentConfig& c) {
  std::string out;
  for (const auto& [k, v] : to_key_values(c)) out += k + "=" + v + "\n";
  return out;
}

std::string content_hash(const ExperimentConfig& c) {
  std::string body;
  for (const auto& [k, v] : to_key_values(c)) {
    if (k != "output_dir") body += k + "=" + v + "\n";
  }
  const std::string blob = "blob " + std::to_string(body.size()) + std::string(1, '\0') + body;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int k = 0; k < len; ++k) {
    hex += kHex[digest[k] >> 4];
    hex += kHex[digest[k] & 0xf];
  }
  return hex;
}

std::vector<std::string> preset_names() { return {"spread2", "spread3", "adversary1v1", "adversary1v2"}; }

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  c.output_dir = "runs/" + name;
  if (name == "spread2") {
    c.scenario = Scenario::spread;
    c.n_agents = 2;
    c.total_steps = 20'000;
  } else if (name == "spread3") {
    c.scenario = Scenario::spread;
    c.n_agents = 3;
    c.total_steps = 30'000;
  } else if (name == "adversary1v1") {
    c.scenario = Scenario::adversary;
    c.n_agents = 2;
    c.total_steps = 20'000;
  } else if (name == "adversary1v2") {
    c.scenario = Scenario::adversary;
    c.n_agents = 3;
    c.comm_topology = CommTopology::one_vs_n;
    c.total_steps = 20'000;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  // Desk-scale runs: update every step on smaller batches with a faster actor.
  c.learning_interval = 1;
  c.minibatch_size = 64;
  c.actor_lr = 1e-3;
  return c;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& c) {
  std::filesystem::path p(c.output_dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv("DMADDPG_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
      return std::filesystem::path(root) / p;
    }
  }
  return p;
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

// Keeps the header and every row at or before `step`.
void truncate_metrics(const std::filesystem::path& path, std::int64_t step) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot resume: metrics file missing at " + path.string());
  std::string line;
  std::string kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      kept += line + "\n";
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (std::stoll(line.substr(0, comma)) <= step) kept += line + "\n";
  }
  in.close();
  write_text(path, kept);
}

void save_checkpoint_atomically(const Trainer& trainer, const std::filesystem::path& dir, const std::string& hash) {
  std::filesystem::path staging = dir;
  staging += ".tmp";
  std::filesystem::remove_all(staging);
  trainer.save_checkpoint(staging, hash);
  std::filesystem::remove_all(dir);
  std::filesystem::rename(staging, dir);
}

}  // namespace

void write_run_record(const RunRecord& r) {
  std::ostringstream out;
  out << "config_hash=" << r.config_hash << '\n'
      << "config_snapshot=" << r.config_snapshot_path.filename().string() << '\n'
      << "metrics=" << r.metrics_path.filename().string() << '\n';
  for (const auto& p : r.checkpoint_paths) out << "checkpoint=" << p.filename().string() << '\n';
  out << "status=" << (r.failed ? "failed" : "ok") << '\n';
  if (r.failure_step) out << "failure_step=" << *r.failure_step << '\n';
  if (!r.failure_message.empty()) out << "failure_message=" << r.failure_message << '\n';
  if (r.resumed) out << "resumed_from_step=" << r.resumed_from_step << '\n';
  out << "wall_clock_seconds=" << format_double(r.wall_clock_seconds) << '\n';
  write_text(r.output_dir / "run_record.txt", out.str());
}

RunRecord run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  RunRecord record;
  record.config = config;
  record.output_dir = resolve_output_dir(config);
  std::filesystem::create_directories(record.output_dir);
  record.config_hash = content_hash(config);
  record.config_snapshot_path = record.output_dir / "config.txt";
  record.metrics_path = record.output_dir / "metrics.csv";
  const std::filesystem::path checkpoint_dir = record.output_dir / "checkpoint";
  Trainer trainer(config.trainer_config(), config.env_config(), config.comm_schedule(), config.seed);
  if (options.resume && std::filesystem::exists(checkpoint_dir / "manifest.txt")) {
    trainer.load_checkpoint(checkpoint_dir, record.config_hash);
    truncate_metrics(record.metrics_path, trainer.current_step());
    record.resumed = true;
    record.resumed_from_step = trainer.current_step();
  } else {
    write_text(record.metrics_path, std::string(kMetricsHeader) + "\n");
  }
  write_text(record.config_snapshot_path, config_snapshot(config));

  std::ofstream metrics(record.metrics_path, std::ios::app | std::ios::binary);
  auto emit = [&] {
    for (const MetricsRow& row : trainer.evaluation_rows()) metrics << format_metrics_row(row) << '\n';
    metrics.flush();
    if (config.checkpoints) save_checkpoint_atomically(trainer, checkpoint_dir, record.config_hash);
  };

  try {
    if (trainer.current_step() == 0) emit();
    while (trainer.current_step() < config.total_steps) {
      if (options.stop_after_step && trainer.current_step() >= *options.stop_after_step) break;
      trainer.step();
      if (trainer.current_step() % config.eval_interval == 0 || trainer.current_step() == config.total_steps) emit();
    }
  } catch (const NumericalError& e) {
    record.failed = true;
    record.failure_step = e.step() >= 0 ? e.step() : trainer.current_step();
    record.failure_message = e.what();
  }
  metrics.close();
  if (config.checkpoints && std::filesystem::exists(checkpoint_dir)) record.checkpoint_paths.push_back(checkpoint_dir);
  record.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_run_record(record);
  return record;
}

std::vector<MetricsCsvRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open metrics file '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  if (line != kMetricsHeader) throw std::invalid_argument("unexpected metrics header in " + path.string());
  std::vector<MetricsCsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() < 4) throw std::invalid_argument("malformed metrics row: " + line);
    rows.push_back(MetricsCsvRow{std::stoll(fields[0]), fields[1], fields[2], std::stod(fields[3])});
  }
  return rows;
}

ComparisonTable compare_runs(const std::vector<std::filesystem::path>& run_dirs, const std::string& key) {
  if (run_dirs.empty()) throw std::invalid_argument("compare_runs: no runs given");
  ComparisonTable table;
  std::optional<ExperimentConfig> first;
  std::vector<std::vector<std::pair<std::int64_t, double>>> series;
  std::set<std::string> used;
  for (const auto& dir : run_dirs) {
    const ExperimentConfig c = load_config_file(dir / "config.txt");
    if (first && (c.scenario != first->scenario || c.n_agents != first->n_agents)) {
      throw std::invalid_argument("compare_runs: runs differ in scenario or number of agents");
    }
    if (!first) first = c;
    std::string label = to_string(c.algorithm);
    for (int k = 2; used.count(label); ++k) label = to_string(c.algorithm) + "#" + std::to_string(k);
    used.insert(label);
    table.columns.push_back(label);
    std::vector<std::pair<std::int64_t, double>> s;
    for (const MetricsCsvRow& r : read_metrics_csv(dir / "metrics.csv")) {
      if (r.agent_or_team == key) s.emplace_back(r.step, r.mean_eval_score);
    }
    if (s.empty()) throw std::invalid_argument("compare_runs: no '" + key + "' rows in " + dir.string());
    series.push_back(std::move(s));
  }
  for (const auto& s : series) {
    if (s.size() != series.front().size()) throw std::invalid_argument("compare_runs: evaluation grids differ");
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s[k].first != series.front()[k].first) throw std::invalid_argument("compare_runs: evaluation grids differ");
    }
  }
  for (std::size_t k = 0; k < series.front().size(); ++k) {
    table.steps.push_back(series.front()[k].first);
    std::vector<double> row;
    for (const auto& s : series) row.push_back(s[k].second);
    table.scores.push_back(std::move(row));
  }
  return table;
}

void write_comparison_csv(std::ostream& out, const ComparisonTable& table) {
  out << "step";
  for (const auto& c : table.columns) out << ',' << c;
  out << '\n';
  for (std::size_t k = 0; k < table.steps.size(); ++k) {
    out << table.steps[k];
    for (double v : table.scores[k]) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace dmaddpg
