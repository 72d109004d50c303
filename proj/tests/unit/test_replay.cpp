#include "doctest.h"

#include <cmath>
#include <sstream>

#include "dmaddpg/replay.hpp"

using namespace dmaddpg;

namespace {

Transition make(double tag) {
  Transition t;
  t.local_observation = Eigen::Vector3d(tag, tag + 1, tag + 2);
  t.joint_action = Eigen::Vector4d(tag, -tag, 0.5, 0.25);
  t.local_reward = -tag;
  t.next_local_observation = Eigen::Vector3d(tag + 10, tag + 11, tag + 12);
  return t;
}

}  // namespace

TEST_SUITE("replay") {
  TEST_CASE("FIFO eviction keeps the newest transitions") {
    ReplayBuffer b(3);
    for (int k = 0; k < 5; ++k) b.push(make(k));
    CHECK(b.size() == 3);
    CHECK(b.at(0) == make(2));
    CHECK(b.at(2) == make(4));
  }

  TEST_CASE("dimension changes are rejected") {
    ReplayBuffer b(4);
    b.push(make(0));
    Transition bad = make(1);
    bad.local_observation = Eigen::Vector2d(1, 2);
    CHECK_THROWS_AS(b.push(bad), std::invalid_argument);
  }

  TEST_CASE("sampling an empty buffer is an error") {
    ReplayBuffer b(4);
    Rng rng(1);
    CHECK_THROWS_AS(b.sample_indices(1, rng), std::logic_error);
  }

  TEST_CASE("minibatch columns are the sampled transitions") {
    ReplayBuffer b(10);
    for (int k = 0; k < 10; ++k) b.push(make(k));
    const Minibatch m = b.gather({3, 3, 7});
    CHECK(m.size() == 3);
    CHECK(m.observations.col(0) == make(3).local_observation);
    CHECK(m.joint_actions.col(2) == make(7).joint_action);
    CHECK(m.rewards[1] == -3.0);
    CHECK(m.next_observations.col(2) == make(7).next_local_observation);
  }

  TEST_CASE("sampling is uniform with replacement") {
    const std::size_t n = 20;
    ReplayBuffer b(n);
    for (std::size_t k = 0; k < n; ++k) b.push(make(static_cast<double>(k)));
    Rng rng(2);
    const std::size_t draws = 100000;
    std::vector<int> counts(n, 0);
    for (std::size_t idx : b.sample_indices(draws, rng)) ++counts[idx];
    const double p = 1.0 / n;
    const double sd = std::sqrt(draws * p * (1 - p));
    for (int c : counts) CHECK(std::abs(c - draws * p) < 4 * sd);
  }

  TEST_CASE("save and load preserve order and contents") {
    ReplayBuffer b(4);
    for (int k = 0; k < 6; ++k) b.push(make(k * 0.1));
    std::stringstream buf;
    b.save(buf);
    const ReplayBuffer back = ReplayBuffer::load(buf);
    REQUIRE(back.size() == b.size());
    CHECK(back.capacity() == b.capacity());
    for (std::size_t k = 0; k < b.size(); ++k) CHECK(back.at(k) == b.at(k));
    // Continues to evict in the same order.
    ReplayBuffer a = b, c = back;
    a.push(make(9));
    c.push(make(9));
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a.at(k) == c.at(k));
  }

  TEST_CASE("capacity limits") {
    CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);
    CHECK_THROWS_AS(ReplayBuffer(kMaxReplayCapacity + 1), std::invalid_argument);
  }
}
