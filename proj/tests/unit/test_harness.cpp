#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dmaddpg/harness.hpp"

using namespace dmaddpg;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dmaddpg_harness_" + name);
  std::filesystem::remove_all(p);
  return p;
}

ExperimentConfig tiny(const std::string& out, Algorithm algo = Algorithm::decentralized) {
  ExperimentConfig c;
  c.algorithm = algo;
  c.total_steps = 300;
  c.eval_interval = 100;
  c.eval_episodes = 3;
  c.minibatch_size = 16;
  c.learning_interval = 10;
  c.warmup = 50;
  c.hidden_dims = {8};
  c.buffer_capacity = 1000;
  c.output_dir = out;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char ch : s) n += ch == '\n';
  return n;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("snapshot round trip and hash stability") {
    ExperimentConfig c = preset("spread3");
    c.algorithm = Algorithm::soft_consensus;
    c.eta = 0.05;
    c.hidden_dims = {32, 16};
    const ExperimentConfig back = load_config_text(config_snapshot(c));
    CHECK(config_snapshot(back) == config_snapshot(c));
    CHECK(content_hash(back) == content_hash(c));
    CHECK(content_hash(c).size() == 40);
    ExperimentConfig moved = c;
    moved.output_dir = "elsewhere";
    CHECK(content_hash(moved) == content_hash(c));
    moved.seed = 99;
    CHECK(content_hash(moved) != content_hash(c));
  }

  TEST_CASE("content hash is the git blob hash of the snapshot without output_dir") {
    const ExperimentConfig c;
    std::string body;
    for (const auto& [k, v] : to_key_values(c)) {
      if (k != "output_dir") body += k + "=" + v + "\n";
    }
    // Reference digest from `git hash-object --stdin` on `body`.
    CHECK(body.size() == 415u);
    CHECK(content_hash(c) == "13e00f581eba50bb0a6b4ea54a4e38c133de97ae");
  }

  TEST_CASE("config text: comments, unknown keys, bad values") {
    const ExperimentConfig c = load_config_text("# comment\nscenario = adversary\nn_agents=3  # inline\n");
    CHECK(c.scenario == Scenario::adversary);
    CHECK(c.n_agents == 3);
    CHECK_THROWS_AS(load_config_text("colour=blue\n"), std::invalid_argument);
    CHECK_THROWS_AS(load_config_text("eta=lots\n"), std::invalid_argument);
    CHECK_THROWS_AS(load_config_text("just words\n"), std::invalid_argument);
  }

  TEST_CASE("topology compatibility") {
    ExperimentConfig c;
    c.comm_topology = CommTopology::one_vs_n;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.scenario = Scenario::adversary;
    c.n_agents = 3;
    CHECK_NOTHROW(c.validate());
    CHECK(c.setting() == Setting::mixed);
  }

  TEST_CASE("presets are valid and distinct") {
    for (const std::string& name : preset_names()) CHECK_NOTHROW(preset(name).validate());
    CHECK(preset("spread3").total_steps == 30'000);
    CHECK(preset("adversary1v2").n_agents == 3);
    CHECK_THROWS_AS(preset("nope"), std::invalid_argument);
  }

  TEST_CASE("run writes every artifact once and twice gives identical CSVs") {
    const auto dir = scratch_dir("twice");
    const RunRecord a = run_experiment(tiny((dir / "a").string()));
    const RunRecord b = run_experiment(tiny((dir / "b").string()));
    CHECK_FALSE(a.failed);
    CHECK(std::filesystem::exists(a.config_snapshot_path));
    CHECK(std::filesystem::exists(a.output_dir / "checkpoint" / "manifest.txt"));
    CHECK(std::filesystem::exists(a.output_dir / "run_record.txt"));
    CHECK(slurp(a.metrics_path) == slurp(b.metrics_path));
    // 4 evaluation points x (2 agents + team) + header
    CHECK(count_lines(slurp(a.metrics_path)) == 1 + 4 * 3);
    const std::string record = slurp(a.output_dir / "run_record.txt");
    CHECK(record.find("metrics=metrics.csv") != std::string::npos);
    CHECK(record.find("status=ok") != std::string::npos);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("eval_interval beyond total_steps gives initial and final rows only") {
    const auto dir = scratch_dir("sparse");
    ExperimentConfig c = tiny(dir.string());
    c.eval_interval = 10'000;
    const RunRecord r = run_experiment(c);
    const auto rows = read_metrics_csv(r.metrics_path);
    REQUIRE(rows.size() == 6);
    CHECK(rows.front().step == 0);
    CHECK(rows.back().step == 300);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("snapshot re-run reproduces the CSV byte for byte") {
    const auto dir = scratch_dir("snapshot");
    const RunRecord a = run_experiment(tiny((dir / "a").string(), Algorithm::hard_consensus));
    ExperimentConfig again = load_config_file(a.config_snapshot_path);
    again.output_dir = (dir / "b").string();
    const RunRecord b = run_experiment(again);
    CHECK(slurp(a.metrics_path) == slurp(b.metrics_path));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("interrupted run resumes without duplicated or skipped rows") {
    const auto dir = scratch_dir("resume");
    const ExperimentConfig straight = tiny((dir / "straight").string(), Algorithm::soft_consensus);
    const RunRecord full = run_experiment(straight);

    ExperimentConfig split = straight;
    split.output_dir = (dir / "split").string();
    RunOptions stop;
    stop.stop_after_step = 150;
    run_experiment(split, stop);
    RunOptions resume;
    resume.resume = true;
    const RunRecord resumed = run_experiment(split, resume);
    CHECK(resumed.resumed);
    CHECK(resumed.resumed_from_step == 100);
    CHECK(slurp(full.metrics_path) == slurp(resumed.metrics_path));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("resume with a different config is refused and leaves the snapshot alone") {
    const auto dir = scratch_dir("resume_mismatch");
    ExperimentConfig c = tiny(dir.string());
    const RunRecord first = run_experiment(c);
    const std::string snapshot = slurp(first.config_snapshot_path);
    c.total_steps += 100;
    RunOptions resume;
    resume.resume = true;
    CHECK_THROWS(run_experiment(c, resume));
    CHECK(slurp(first.config_snapshot_path) == snapshot);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("aggressive hard consensus failure keeps partial metrics") {
    const auto dir = scratch_dir("fail");
    ExperimentConfig c = tiny(dir.string(), Algorithm::hard_consensus);
    c.eta = 0.5;
    c.critic_lr = 1e300;
    const RunRecord r = run_experiment(c);
    CHECK(r.failed);
    REQUIRE(r.failure_step.has_value());
    CHECK(*r.failure_step > 0);
    CHECK(read_metrics_csv(r.metrics_path).size() >= 3);
    CHECK(slurp(dir / "run_record.txt").find("status=failed") != std::string::npos);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("compare: alignment, column order and mismatches") {
    const auto dir = scratch_dir("compare");
    const RunRecord a = run_experiment(tiny((dir / "dec").string()));
    const RunRecord b = run_experiment(tiny((dir / "mad").string(), Algorithm::maddpg));
    const ComparisonTable single = compare_runs({a.output_dir});
    const auto rows = read_metrics_csv(a.metrics_path);
    REQUIRE(single.steps.size() == 4);
    CHECK(single.scores[1][0] == rows[5].mean_eval_score);  // team0 row at step 100

    const ComparisonTable both = compare_runs({b.output_dir, a.output_dir});
    CHECK(both.columns == std::vector<std::string>{"maddpg", "decentralized"});
    std::ostringstream csv;
    write_comparison_csv(csv, both);
    CHECK(csv.str().rfind("step,maddpg,decentralized\n", 0) == 0);

    ExperimentConfig other = tiny((dir / "short").string());
    other.eval_interval = 150;
    const RunRecord c = run_experiment(other);
    CHECK_THROWS_AS(compare_runs({a.output_dir, c.output_dir}), std::invalid_argument);
    ExperimentConfig three = tiny((dir / "three").string());
    three.n_agents = 3;
    const RunRecord d = run_experiment(three);
    CHECK_THROWS_AS(compare_runs({a.output_dir, d.output_dir}), std::invalid_argument);
    std::filesystem::remove_all(dir);
  }
}
