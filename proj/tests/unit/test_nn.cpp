#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "../support/convert.hpp"
#include "dmaddpg/errors.hpp"
#include "dmaddpg/nn.hpp"

using namespace dmaddpg;
using testing_support::to_eigen;
using testing_support::to_std;

namespace {

MlpSpec small_spec(Activation out = Activation::identity) {
  MlpSpec s;
  s.input_dim = 4;
  s.hidden_dims = {6, 5};
  s.output_dim = 3;
  s.output_activation = out;
  return s;
}

ParamVector random_params(const MlpSpec& spec, Rng& rng) {
  ParamVector p = ParamVector::zeros(spec.parameter_count());
  for (auto& v : p.span()) v = rng.uniform(-0.8, 0.8);
  return p;
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("parameter count and layer shapes") {
    const MlpSpec s = small_spec();
    CHECK(s.parameter_count() == (4 * 6 + 6) + (6 * 5 + 5) + (5 * 3 + 3));
    CHECK(s.layer_count() == 3);
    CHECK(s.layer_input(1) == 6);
    CHECK(s.layer_output(2) == 3);
  }

  TEST_CASE("invalid specs are rejected") {
    MlpSpec s = small_spec();
    s.input_dim = 0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = small_spec();
    s.hidden_dims = {4, 0};
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  }

  TEST_CASE("init: zero biases, weights within the fan-in bound") {
    Rng rng(1);
    const MlpSpec s = small_spec();
    const ParamVector p = mlp_init(s, rng);
    for (std::size_t l = 0; l < s.layer_count(); ++l) {
      const LayerView v = layer_view(p, s, l);
      CHECK(v.bias.isZero(0.0));
      CHECK(v.weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(s.layer_input(l)));
    }
  }

  TEST_CASE("forward matches the scalar reference") {
    Rng rng(2);
    for (Activation out : {Activation::identity, Activation::tanh}) {
      const MlpSpec s = small_spec(out);
      const ParamVector p = random_params(s, rng);
      const oracle::Net net = testing_support::to_oracle(s);
      Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 7);
      const Eigen::MatrixXd y = mlp_forward_batch(p, s, x);
      for (int c = 0; c < 7; ++c) {
        const auto ref = oracle::forward(net, to_std(p.values), testing_support::column(x, c));
        for (int r = 0; r < 3; ++r) CHECK(y(r, c) == doctest::Approx(ref[r]).epsilon(1e-13));
      }
    }
  }

  TEST_CASE("backward matches central differences of the reference") {
    Rng rng(3);
    const MlpSpec s = small_spec(Activation::tanh);
    const oracle::Net net = testing_support::to_oracle(s);
    const ParamVector p = random_params(s, rng);
    Eigen::VectorXd x(4), cot(3);
    for (int k = 0; k < 4; ++k) x[k] = rng.uniform(-1, 1);
    for (int k = 0; k < 3; ++k) cot[k] = rng.uniform(-1, 1);
    const MlpGradients g = mlp_backward(p, s, x, cot);

    auto loss_params = [&](const std::vector<double>& theta) {
      const auto y = oracle::forward(net, theta, to_std(x));
      double v = 0;
      for (int k = 0; k < 3; ++k) v += cot[k] * y[k];
      return v;
    };
    CHECK(oracle::max_relative_error(to_std(g.params.values),
                                     oracle::central_difference(loss_params, to_std(p.values))) < 1e-6);

    auto loss_input = [&](const std::vector<double>& in) {
      const auto y = oracle::forward(net, to_std(p.values), in);
      double v = 0;
      for (int k = 0; k < 3; ++k) v += cot[k] * y[k];
      return v;
    };
    CHECK(oracle::max_relative_error(to_std(g.inputs.col(0)), oracle::central_difference(loss_input, to_std(x))) <
          1e-6);
  }

  TEST_CASE("batched backward sums per-sample gradients") {
    Rng rng(4);
    const MlpSpec s = small_spec();
    const ParamVector p = random_params(s, rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
    Eigen::MatrixXd cot = Eigen::MatrixXd::Random(3, 3);
    const MlpGradients batch = mlp_backward(mlp_forward_pass(p, s, x), p, s, cot);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.size()));
    for (int c = 0; c < 3; ++c) sum += mlp_backward(p, s, x.col(c), cot.col(c)).params.values;
    CHECK((batch.params.values - sum).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("adam matches the hand-computed first two steps") {
    ParamVector theta(Eigen::Vector2d(1.0, -2.0));
    AdamState st = AdamState::for_size(2, 0.1);
    const ParamVector g1(Eigen::Vector2d(0.5, -4.0));
    adam_step(theta, g1, st);
    // Step 1: bias-corrected moments equal g and g^2.
    CHECK(theta.values[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
    CHECK(theta.values[1] == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
    const ParamVector g2(Eigen::Vector2d(1.0, 2.0));
    const double before = theta.values[0];
    adam_step(theta, g2, st);
    const double m = (0.9 * 0.1 * 0.5 + 0.1 * 1.0) / (1 - 0.81);
    const double v = (0.999 * 0.001 * 0.25 + 0.001 * 1.0) / (1 - 0.999 * 0.999);
    CHECK(theta.values[0] == doctest::Approx(before - 0.1 * m / (std::sqrt(v) + 1e-8)).epsilon(1e-13));
    CHECK(st.step_count == 2);
  }

  TEST_CASE("adam refuses non-finite gradients without side effects") {
    ParamVector theta(Eigen::Vector2d(1.0, 2.0));
    AdamState st = AdamState::for_size(2, 0.1);
    const ParamVector bad(Eigen::Vector2d(std::numeric_limits<double>::quiet_NaN(), 0.0));
    CHECK_THROWS_AS(adam_step(theta, bad, st), NumericalError);
    CHECK(theta.values == Eigen::Vector2d(1.0, 2.0));
    CHECK(st.step_count == 0);
  }

  TEST_CASE("soft update endpoints and interpolation") {
    const ParamVector target(Eigen::Vector3d(1, 2, 3));
    const ParamVector online(Eigen::Vector3d(-1, 0.5, 7));
    CHECK(soft_update(target, online, 1.0).bit_equal(online));
    const ParamVector mid = soft_update(target, online, 0.25);
    for (int k = 0; k < 3; ++k) {
      CHECK(mid.values[k] == doctest::Approx(0.25 * online.values[k] + 0.75 * target.values[k]).epsilon(1e-15));
    }
  }

  TEST_CASE("weighted sum of identical vectors is the vector") {
    const ParamVector v(Eigen::Vector3d(0.1, -0.7, 3.3));
    const std::vector<ParamVector> all{v, v, v};
    const std::vector<double> w{0.2, 0.5, 0.3};
    CHECK((param_weighted_sum(w, all).values - v.values).cwiseAbs().maxCoeff() < 1e-15);
    const std::vector<double> one{0.0, 1.0, 0.0};
    CHECK(param_weighted_sum(one, all).bit_equal(v));
  }

  TEST_CASE("network and optimizer serialization round-trip bitwise") {
    Rng rng(6);
    const MlpSpec s = small_spec(Activation::tanh);
    const ParamVector p = random_params(s, rng);
    std::stringstream buf;
    save_network(buf, s, p);
    const LoadedNetwork back = load_network(buf);
    CHECK(back.spec == s);
    CHECK(back.params.bit_equal(p));

    AdamState st = AdamState::for_size(p.size(), 1e-3);
    ParamVector q = p;
    adam_step(q, p, st);
    std::stringstream abuf;
    save_adam(abuf, st);
    CHECK(load_adam(abuf) == st);

    std::stringstream broken("XXXX garbage");
    CHECK_THROWS(load_network(broken));
  }
}
