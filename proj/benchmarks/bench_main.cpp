#include <benchmark/benchmark.h>

#include "dmaddpg/harness.hpp"

using namespace dmaddpg;

namespace {

MlpSpec critic_spec(const std::vector<int>& hidden) { return MlpSpec{14, hidden, 1, Activation::relu, Activation::identity}; }

const std::vector<int>& hidden_for(int scale) { return scale == 0 ? kDeskScaleHidden : kFullScaleHidden; }

void BM_MlpForward(benchmark::State& state) {
  const MlpSpec spec = critic_spec(hidden_for(static_cast<int>(state.range(0))));
  Rng rng(1);
  const ParamVector p = mlp_init(spec, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(spec.input_dim, state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(mlp_forward_batch(p, spec, x));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_MlpForward)->Args({0, 1})->Args({0, 256})->Args({1, 256});

void BM_MlpBackward(benchmark::State& state) {
  const MlpSpec spec = critic_spec(hidden_for(static_cast<int>(state.range(0))));
  Rng rng(2);
  const ParamVector p = mlp_init(spec, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(spec.input_dim, state.range(1));
  const ForwardPass pass = mlp_forward_pass(p, spec, x);
  const Eigen::MatrixXd cot = Eigen::MatrixXd::Ones(1, state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(mlp_backward(pass, p, spec, cot));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_MlpBackward)->Args({0, 256})->Args({1, 256});

void BM_EnvStep(benchmark::State& state) {
  const EnvConfig c = EnvConfig::spread(static_cast<int>(state.range(0)));
  Rng rng(3);
  WorldState s = env_reset(c, rng).state;
  const std::vector<Action> actions(static_cast<std::size_t>(c.n_agents), Action(0.3, -0.2));
  for (auto _ : state) {
    StepResult r = env_step(s, actions, c);
    s = r.done ? env_reset(c, rng).state : std::move(r.state);
  }
}
BENCHMARK(BM_EnvStep)->Arg(2)->Arg(10);

void BM_HardConsensus(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(4);
  const MlpSpec spec = critic_spec(kDeskScaleHidden);
  std::vector<ParamVector> critics;
  for (int i = 0; i < n; ++i) critics.push_back(mlp_init(spec, rng));
  const CommMatrix c = build_cooperative(n, 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(hard_consensus(critics, c));
}
BENCHMARK(BM_HardConsensus)->Arg(2)->Arg(10);

void BM_TrainerLearningStep(benchmark::State& state) {
  ExperimentConfig c = preset("spread2");
  c.algorithm = static_cast<Algorithm>(state.range(0));
  c.learning_interval = 1;
  Trainer t(c.trainer_config(), c.env_config(), c.comm_schedule(), 0);
  while (t.learning_updates() == 0) t.step();
  for (auto _ : state) t.step();
  state.SetLabel(to_string(c.algorithm));
}
BENCHMARK(BM_TrainerLearningStep)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

void BM_Evaluate(benchmark::State& state) {
  ExperimentConfig c = preset("spread2");
  Trainer t(c.trainer_config(), c.env_config(), std::nullopt, 0);
  for (auto _ : state) {
    Rng rng(5);
    benchmark::DoNotOptimize(evaluate(greedy_policy(t.agents()), c.env_config(), 100, rng));
  }
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
