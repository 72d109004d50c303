#include "doctest.h"

#include <sstream>

#include "../support/convert.hpp"
#include "dmaddpg/comms.hpp"

using namespace dmaddpg;

namespace {

std::vector<ParamVector> random_params(int n, int dim, Rng& rng) {
  std::vector<ParamVector> out;
  for (int i = 0; i < n; ++i) {
    ParamVector p = ParamVector::zeros(static_cast<std::size_t>(dim));
    for (auto& v : p.span()) v = rng.uniform(-2, 2);
    out.push_back(p);
  }
  return out;
}

}  // namespace

TEST_SUITE("comms") {
  TEST_CASE("constructors produce the documented entries") {
    const CommMatrix c = build_cooperative(4, 0.3);
    CHECK(c(0, 0) == doctest::Approx(0.7));
    CHECK(c(2, 1) == doctest::Approx(0.1));
    const CommMatrix o = build_one_vs_n(4, 0.2);
    CHECK(o(0, 0) == 1.0);
    CHECK(o(0, 1) == 0.0);
    CHECK(o(1, 0) == 0.0);
    CHECK(o(1, 1) == doctest::Approx(0.8));
    CHECK(o(1, 3) == doctest::Approx(0.1));
    const CommMatrix r = build_ring(3, 0.25);
    CHECK(r(0, 1) == 0.25);
    CHECK(r(2, 0) == 0.25);
    CHECK(r(1, 0) == 0.0);
    CHECK(r(1, 1) == 0.75);
  }

  TEST_CASE("eta = 0 gives the identity") {
    CHECK(build_cooperative(3, 0.0).is_identity());
    CHECK(build_ring(3, 0.0).is_identity());
  }

  TEST_CASE("non-stochastic matrices are rejected") {
    Eigen::MatrixXd m(2, 2);
    m << 0.5, 0.6, 0.5, 0.5;
    CHECK_FALSE(stochasticity_violation(m).empty());
    CHECK_THROWS_AS(CommMatrix{m}, std::invalid_argument);
    m << 1.5, -0.5, 0.5, 0.5;
    CHECK_THROWS_AS(CommMatrix{m}, std::invalid_argument);
    CHECK_THROWS_AS(CommMatrix{Eigen::MatrixXd::Identity(2, 3)}, std::invalid_argument);
  }

  TEST_CASE("file round trip and malformed input") {
    const CommMatrix c = build_ring(4, 0.1);
    std::stringstream buf;
    write_comm_matrix(buf, c);
    const CommMatrix back = load_comm_matrix(buf);
    CHECK(back.entries() == c.entries());
    std::stringstream short_input("2\n1 0\n0");
    CHECK_THROWS(load_comm_matrix(short_input));
    std::stringstream trailing("1\n1\n7");
    CHECK_THROWS(load_comm_matrix(trailing));
  }

  TEST_CASE("hard consensus with the identity is bitwise the input") {
    Rng rng(1);
    const auto params = random_params(3, 17, rng);
    const auto out = hard_consensus(params, CommMatrix::identity(3));
    for (int i = 0; i < 3; ++i) CHECK(out[i].bit_equal(params[i]));
  }

  TEST_CASE("hard consensus with uniform weights gives the mean") {
    Rng rng(2);
    const auto params = random_params(4, 9, rng);
    const CommMatrix u(Eigen::MatrixXd::Constant(4, 4, 0.25));
    const auto out = hard_consensus(params, u);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(9);
    for (const auto& p : params) mean += p.values / 4.0;
    for (const auto& o : out) CHECK((o.values - mean).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("consensus_row fetches only neighbours") {
    Rng rng(3);
    const auto params = random_params(4, 5, rng);
    const CommMatrix r = build_ring(4, 0.5);
    std::vector<int> fetched;
    consensus_row(r, 1, [&](int j) -> const ParamVector& {
      fetched.push_back(j);
      return params[static_cast<std::size_t>(j)];
    });
    CHECK(fetched == std::vector<int>{1, 2});
  }

  TEST_CASE("soft penalty value and gradient") {
    Rng rng(4);
    const auto params = random_params(3, 6, rng);
    const std::vector<double> row{0.5, 0.3, 0.2};
    const double zeta = 0.7, floor = 1e-8;
    const SoftPenalty p = soft_penalty(params[0], params, row, zeta, floor, 0);
    auto value = [&](const std::vector<double>& own) {
      double v = 0;
      for (int j = 1; j < 3; ++j) {
        double num = 0, den = floor;
        for (int k = 0; k < 6; ++k) {
          num += (own[k] - params[j].values[k]) * (own[k] - params[j].values[k]);
          den += params[j].values[k] * params[j].values[k];
        }
        v += row[j] * num / den;
      }
      return zeta * v;
    };
    const auto own = testing_support::to_std(params[0].values);
    CHECK(p.value == doctest::Approx(value(own)).epsilon(1e-13));
    CHECK(oracle::max_relative_error(testing_support::to_std(p.gradient.values),
                                     oracle::central_difference(value, own)) < 1e-7);
  }

  TEST_CASE("soft penalty skips zero-weight entries and vanishes for zeta = 0") {
    Rng rng(5);
    const auto params = random_params(3, 4, rng);
    const ParamVector* ptrs[] = {&params[0], nullptr, &params[2]};
    const std::vector<double> row{0.6, 0.0, 0.4};
    const SoftPenalty p = soft_penalty(params[0], ptrs, row, 0.1, 1e-8, 0);
    CHECK(p.value > 0.0);
    const SoftPenalty z = soft_penalty(params[0], ptrs, row, 0.0, 1e-8, 0);
    CHECK(z.value == 0.0);
    CHECK(z.gradient.values.isZero(0.0));
  }

  TEST_CASE("config validation") {
    ConsensusConfig c;
    c.zeta = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.eta = 1.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }
}
