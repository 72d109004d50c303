#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dmaddpg/rng.hpp"

namespace dmaddpg {

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2 };

// Fully connected network shape. Layer l maps dims[l] -> dims[l+1], where
// dims = {input_dim, hidden_dims..., output_dim}.
struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims;
  int output_dim = 1;
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::identity;

  // Throws std::invalid_argument on non-positive dims or a non-admissible
  // activation (output must be identity or tanh).
  void validate() const;

  std::size_t layer_count() const { return hidden_dims.size() + 1; }
  int layer_input(std::size_t layer) const;
  int layer_output(std::size_t layer) const;
  std::size_t parameter_count() const;

  bool operator==(const MlpSpec&) const = default;
};

// Five hidden layers of 256 units, as used for the full-size experiments.
inline const std::vector<int> kFullScaleHidden{256, 256, 256, 256, 256};
// Two hidden layers of 64 units; desk-scale default.
inline const std::vector<int> kDeskScaleHidden{64, 64};

// Flat parameter store. Layout, layer by layer: the out x in weight matrix in
// column-major order, followed by the out-length bias vector.
struct ParamVector {
  Eigen::VectorXd values;

  ParamVector() = default;
  explicit ParamVector(Eigen::VectorXd v) : values(std::move(v)) {}
  static ParamVector zeros(std::size_t n) { return ParamVector(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))); }

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  bool all_finite() const { return values.allFinite(); }
  std::span<const double> span() const { return {values.data(), size()}; }
  std::span<double> span() { return {values.data(), size()}; }

  // Bitwise comparison; distinguishes +0.0 from -0.0 and compares NaN payloads.
  bool bit_equal(const ParamVector& other) const;
};

// Weight and bias views into a ParamVector for one layer.
struct LayerView {
  Eigen::Map<const Eigen::MatrixXd> weight;
  Eigen::Map<const Eigen::VectorXd> bias;
};
LayerView layer_view(const ParamVector& params, const MlpSpec& spec, std::size_t layer);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
ParamVector mlp_init(const MlpSpec& spec, Rng& rng);

// Activations of every layer for a batch; columns are samples.
// post[0] is the input, post.back() the network output.
struct ForwardPass {
  std::vector<Eigen::MatrixXd> post;
  const Eigen::MatrixXd& output() const { return post.back(); }
};

ForwardPass mlp_forward_pass(const ParamVector& params, const MlpSpec& spec, const Eigen::MatrixXd& inputs);
Eigen::MatrixXd mlp_forward_batch(const ParamVector& params, const MlpSpec& spec, const Eigen::MatrixXd& inputs);
Eigen::VectorXd mlp_forward(const ParamVector& params, const MlpSpec& spec, const Eigen::VectorXd& input);

// Reverse-mode gradients of sum(cotangent .* output). The parameter gradient
// is summed over the batch; input gradients keep one column per sample.
struct MlpGradients {
  ParamVector params;
  Eigen::MatrixXd inputs;
};

MlpGradients mlp_backward(const ForwardPass& pass, const ParamVector& params, const MlpSpec& spec,
                          const Eigen::MatrixXd& cotangent);
MlpGradients mlp_backward(const ParamVector& params, const MlpSpec& spec, const Eigen::VectorXd& input,
                          const Eigen::VectorXd& output_cotangent);

struct AdamState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::uint64_t step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_size(std::size_t n, double learning_rate);
  void validate() const;
  bool operator==(const AdamState&) const = default;
};

inline constexpr double kCriticLearningRate = 1e-3;
inline constexpr double kActorLearningRate = 1e-4;

// One bias-corrected Adam descent step in place. Throws NumericalError on a
// non-finite gradient entry (parameters and state untouched in that case).
void adam_step(ParamVector& params, const ParamVector& grads, AdamState& state);

// tau * online + (1 - tau) * target.
ParamVector soft_update(const ParamVector& target, const ParamVector& online, double tau);

// Sum_j weights[j] * params_list[j]. Zero weights are skipped entirely, so
// a one-hot weight vector returns an exact copy.
ParamVector param_weighted_sum(std::span<const double> weights, std::span<const ParamVector> params_list);
ParamVector param_weighted_sum(std::span<const double> weights, std::span<const ParamVector* const> params_list);

// Self-describing network container: tag, format version, byte-order
// declaration, MlpSpec fields, flat parameters. Round trip is bit-exact.
inline constexpr std::uint32_t kNetworkFormatVersion = 1;
void save_network(std::ostream& out, const MlpSpec& spec, const ParamVector& params);
struct LoadedNetwork {
  MlpSpec spec;
  ParamVector params;
};
LoadedNetwork load_network(std::istream& in);

void save_adam(std::ostream& out, const AdamState& state);
AdamState load_adam(std::istream& in);

}  // namespace dmaddpg
