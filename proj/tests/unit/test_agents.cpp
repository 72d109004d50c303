#include "doctest.h"

#include "../support/objective_oracles.hpp"
#include "dmaddpg/agents.hpp"

using namespace dmaddpg;
using namespace testing_support;

namespace {

constexpr double kFdTolerance = 1e-4;

}  // namespace

TEST_SUITE("agents") {
  TEST_CASE("make_agent shapes and initial targets") {
    Rng rng(1);
    AgentShape shape{1, false, 10, 4, 14, {2, 2}};
    const AgentRuntime a = make_agent(shape, AgentHyper{}, rng);
    CHECK(a.actor_spec.output_dim == 4);
    CHECK(a.actor_spec.output_activation == Activation::tanh);
    CHECK(a.critic_spec.input_dim == 14);
    CHECK(a.critic_spec.output_dim == 1);
    CHECK(a.actor_target.bit_equal(a.actor));
    CHECK(a.critic_target.bit_equal(a.critic));
  }

  TEST_CASE("select_action takes the own slice, adds noise and clamps") {
    Rng rng(2);
    AgentRuntime a = random_agent(3, 4, {5}, rng, false, -1, 1);
    const Eigen::Vector3d o(0.1, -0.2, 0.3);
    const Eigen::VectorXd out = mlp_forward(a.actor, a.actor_spec, o);
    const Action act = select_action(a, o, Vec2(0.01, -0.02));
    CHECK(act.x() == doctest::Approx(out[2] + 0.01));
    CHECK(act.y() == doctest::Approx(out[3] - 0.02));
    const Action big = select_action(a, o, Vec2(5, -5));
    CHECK(big == Action(1, -1));
  }

  TEST_CASE("noise schedule anneals linearly then holds") {
    const NoiseSpec n{0.3, 0.05, 100};
    CHECK(n.sigma(0) == 0.3);
    CHECK(n.sigma(50) == doctest::Approx(0.175));
    CHECK(n.sigma(100) == 0.05);
    CHECK(n.sigma(1000) == 0.05);
  }

  TEST_CASE("teams and slot masks") {
    const TeamAssignment t = TeamAssignment::one_vs_rest(3);
    CHECK(t.team_count() == 2);
    CHECK(t.teammates(1) == std::vector<int>{1, 2});
    CHECK(t.adversaries(1) == std::vector<int>{0});
    CHECK(t.adversaries(0) == std::vector<int>{1, 2});
    const std::vector<ActionSlice> slices{{0, 2}, {2, 2}, {4, 2}};
    CHECK(slot_mask({0, 2}, slices, 6) == std::vector<bool>{true, true, false, false, true, true});
    CHECK(TeamAssignment::single_team(3).adversaries(2).empty());
  }

  TEST_CASE("decentralized target equals r + gamma Q'(o', mu'(o'))") {
    Rng rng(3);
    const AgentRuntime a = random_agent(5, 4, {6}, rng);
    const Minibatch b = random_batch(5, 4, 7, rng);
    const Eigen::VectorXd y = critic_target_decentralized(a, b, 0.9);
    const oracle::Net actor = to_oracle(a.actor_spec);
    for (int s = 0; s < 7; ++s) {
      const auto o2 = column(b.next_observations, s);
      const auto mu = oracle::forward(actor, to_std(a.actor_target.values), o2);
      const double ref = b.rewards[s] + 0.9 * q_ref(a, to_std(a.critic_target.values), o2, mu);
      CHECK(y[s] == doctest::Approx(ref).epsilon(1e-12));
    }
  }

  TEST_CASE("centralized target uses every agent's target actor on its own observation") {
    Rng rng(4);
    // Two agents with observation dims 3 and 4, joint action dim 4.
    const AgentRuntime a0 = random_agent(3, 4, {5}, rng, true, 7, 0);
    const AgentRuntime a1 = random_agent(4, 4, {5}, rng, true, 7, 1);
    ObservationLayout layout{{0, 3}, {3, 4}};
    const Minibatch b = random_batch(7, 4, 5, rng);
    const TargetPolicy policies[] = {{&a0.actor_spec, &a0.actor_target, a0.own_action},
                                     {&a1.actor_spec, &a1.actor_target, a1.own_action}};
    const Eigen::VectorXd y = critic_target_centralized(a1, policies, layout, b, 0.95);
    for (int s = 0; s < 5; ++s) {
      const auto x2 = column(b.next_observations, s);
      const auto m0 = oracle::forward(to_oracle(a0.actor_spec), to_std(a0.actor_target.values), {x2.begin(), x2.begin() + 3});
      const auto m1 = oracle::forward(to_oracle(a1.actor_spec), to_std(a1.actor_target.values), {x2.begin() + 3, x2.end()});
      const double ref = b.rewards[s] + 0.95 * q_ref(a1, to_std(a1.critic_target.values), x2, concat(m0, m1));
      CHECK(y[s] == doctest::Approx(ref).epsilon(1e-12));
    }
  }

  TEST_CASE("critic loss gradient with and without penalty") {
    Rng rng(5);
    const AgentRuntime a = random_agent(4, 4, {8, 6}, rng);
    const Minibatch b = random_batch(4, 4, 9, rng);
    Eigen::VectorXd y(9);
    for (int k = 0; k < 9; ++k) y[k] = rng.uniform(-2, 1);
    const auto theta = to_std(a.critic.values);

    const CriticLoss plain = critic_loss(a, b, y);
    CHECK(plain.mse == doctest::Approx(critic_loss_ref(a, b, y, theta)).epsilon(1e-12));
    auto f = [&](const std::vector<double>& t) { return critic_loss_ref(a, b, y, t); };
    CHECK(oracle::max_relative_error(to_std(plain.gradient.values), oracle::central_difference(f, theta)) <
          kFdTolerance);

    ParamVector n1 = a.critic, n2 = a.critic;
    for (auto& v : n1.span()) v += rng.uniform(-0.2, 0.2);
    for (auto& v : n2.span()) v += rng.uniform(-0.2, 0.2);
    const ParamVector* all[] = {&a.critic, &n1, &n2};
    const std::vector<double> row{0.5, 0.25, 0.25};
    const SoftPenalty pen = soft_penalty(a.critic, all, row, 0.3, 1e-8, 0);
    const CriticLoss soft = critic_loss(a, b, y, &pen);
    auto g = [&](const std::vector<double>& t) {
      return critic_loss_ref(a, b, y, t, {to_std(n1.values), to_std(n2.values)}, {0.25, 0.25}, 0.3);
    };
    CHECK(soft.total() == doctest::Approx(g(theta)).epsilon(1e-12));
    // The penalty is held at the current neighbours; its own-parameter
    // dependence is exactly what the reference differentiates.
    CHECK(oracle::max_relative_error(to_std(soft.gradient.values), oracle::central_difference(g, theta)) <
          kFdTolerance);
  }

  TEST_CASE("surrogate objective gradient for full, team and adversary masks") {
    Rng rng(6);
    const AgentRuntime a = random_agent(5, 6, {7, 5}, rng);
    const Minibatch b = random_batch(5, 6, 8, rng);
    const auto theta = to_std(a.actor.values);
    const std::vector<ActionSlice> slices{{0, 2}, {2, 2}, {4, 2}};
    for (const std::vector<bool>& mask : {std::vector<bool>(6, true), slot_mask({1, 2}, slices, 6),
                                          slot_mask({0}, slices, 6)}) {
      const ActorObjective obj = surrogate_objective(a, b, mask);
      auto f = [&](const std::vector<double>& t) { return surrogate_ref(a, b, mask, t); };
      CHECK(obj.value == doctest::Approx(f(theta)).epsilon(1e-12));
      CHECK(oracle::max_relative_error(to_std(obj.gradient.values), oracle::central_difference(f, theta)) <
            kFdTolerance);
    }
  }

  TEST_CASE("centralized objective gradient") {
    Rng rng(7);
    const AgentRuntime a = random_agent(3, 4, {6}, rng, true, 7, 1);
    ObservationLayout layout{{0, 4}, {4, 3}};
    const Minibatch b = random_batch(7, 4, 6, rng);
    const ActorObjective obj = centralized_objective(a, layout, b);
    const auto theta = to_std(a.actor.values);
    auto f = [&](const std::vector<double>& t) { return centralized_ref(a, 4, 3, b, t); };
    CHECK(obj.value == doctest::Approx(f(theta)).epsilon(1e-12));
    CHECK(oracle::max_relative_error(to_std(obj.gradient.values), oracle::central_difference(f, theta)) <
          kFdTolerance);
  }

  TEST_CASE("mixed update: ascent on team slots, then descent on adversary slots") {
    Rng rng(8);
    AgentRuntime a = random_agent(4, 4, {6}, rng, false, -1, 1);
    const Minibatch b = random_batch(4, 4, 6, rng);
    const TeamAssignment teams = TeamAssignment::one_vs_rest(2);
    const std::vector<ActionSlice> slices{{0, 2}, {2, 2}};
    const double lr = a.actor_optimizer.learning_rate;

    // A fresh Adam state moves each coordinate by lr * g / (|g| + eps).
    AgentRuntime ref = a;
    const ActorObjective team = surrogate_objective(ref, b, slot_mask({1}, slices, 4));
    ref.actor.values.array() += lr * team.gradient.values.array() / (team.gradient.values.array().abs() + 1e-8);
    const ActorObjective adv = surrogate_objective(ref, b, slot_mask({0}, slices, 4));
    ref.actor.values.array() -= lr * adv.gradient.values.array() / (adv.gradient.values.array().abs() + 1e-8);

    const MixedObjectives out = actor_update_mixed(a, b, teams, slices);
    CHECK(out.team == doctest::Approx(team.value).epsilon(1e-14));
    REQUIRE(out.adversary.has_value());
    CHECK((a.actor.values - ref.actor.values).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.actor_optimizer.step_count == 1);
    CHECK(a.adversary_actor_optimizer.step_count == 1);
  }

  TEST_CASE("mixed update with one team is the surrogate update") {
    Rng rng(9);
    AgentRuntime a = random_agent(4, 4, {6}, rng);
    AgentRuntime b = a;
    const Minibatch batch = random_batch(4, 4, 6, rng);
    const std::vector<ActionSlice> slices{{0, 2}, {2, 2}};
    const MixedObjectives m = actor_update_mixed(a, batch, TeamAssignment::single_team(2), slices);
    const double s = actor_update_surrogate(b, batch);
    CHECK(m.team == s);
    CHECK_FALSE(m.adversary.has_value());
    CHECK(a.actor.bit_equal(b.actor));
    CHECK(a.actor_optimizer == b.actor_optimizer);
  }

  TEST_CASE("critic update lowers the loss for a small step") {
    Rng rng(10);
    AgentRuntime a = random_agent(4, 4, {16}, rng);
    a.critic_optimizer.learning_rate = 1e-4;
    const Minibatch b = random_batch(4, 4, 32, rng);
    const Eigen::VectorXd y = critic_target_decentralized(a, b, 0.95);
    const double before = critic_update(a, b, y).mse;
    CHECK(critic_loss(a, b, y).mse < before);
  }

  TEST_CASE("target update is the tau interpolation") {
    Rng rng(11);
    AgentRuntime a = random_agent(3, 2, {4}, rng);
    const ParamVector old_target = a.actor_target;
    update_targets(a, 0.01);
    CHECK((a.actor_target.values - (0.01 * a.actor.values + 0.99 * old_target.values)).cwiseAbs().maxCoeff() <
          1e-15);
  }
}
