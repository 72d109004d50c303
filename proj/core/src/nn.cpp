#include "dmaddpg/nn.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dmaddpg/binary_io.hpp"
#include "dmaddpg/errors.hpp"

namespace dmaddpg {

namespace {

void apply_activation(Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::tanh:
      z = z.array().tanh().matrix();
      break;
  }
}

// Multiplies `grad` (d loss / d post-activation) in place by the activation
// derivative, expressed through the post-activation values.
void apply_activation_derivative(Eigen::MatrixXd& grad, const Eigen::MatrixXd& post, Activation act) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::relu:
      grad = (post.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::tanh:
      grad.array() *= 1.0 - post.array().square();
      break;
  }
}

Activation activation_for_layer(const MlpSpec& spec, std::size_t layer) {
  return layer + 1 == spec.layer_count() ? spec.output_activation : spec.hidden_activation;
}

std::size_t layer_offset(const MlpSpec& spec, std::size_t layer) {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    offset += static_cast<std::size_t>(spec.layer_input(l) + 1) * static_cast<std::size_t>(spec.layer_output(l));
  }
  return offset;
}

void check_params(const ParamVector& params, const MlpSpec& spec) {
  if (params.size() != spec.parameter_count()) {
    throw std::invalid_argument("parameter vector length " + std::to_string(params.size()) +
                                " does not match network spec (" + std::to_string(spec.parameter_count()) + ")");
  }
}

}  // namespace

void MlpSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) throw std::invalid_argument("MlpSpec: dims must be >= 1");
  for (int h : hidden_dims) {
    if (h < 1) throw std::invalid_argument("MlpSpec: hidden dims must be >= 1");
  }
  if (output_activation == Activation::relu) {
    throw std::invalid_argument("MlpSpec: output activation must be identity or tanh");
  }
  if (hidden_activation == Activation::identity && !hidden_dims.empty()) {
    throw std::invalid_argument("MlpSpec: hidden activation must be relu or tanh");
  }
}

int MlpSpec::layer_input(std::size_t layer) const {
  return layer == 0 ? input_dim : hidden_dims[layer - 1];
}

int MlpSpec::layer_output(std::size_t layer) const {
  return layer < hidden_dims.size() ? hidden_dims[layer] : output_dim;
}

std::size_t MlpSpec::parameter_count() const { return layer_offset(*this, layer_count()); }

bool ParamVector::bit_equal(const ParamVector& other) const {
  return size() == other.size() &&
         (size() == 0 || std::memcmp(values.data(), other.values.data(), size() * sizeof(double)) == 0);
}

LayerView layer_view(const ParamVector& params, const MlpSpec& spec, std::size_t layer) {
  const std::size_t offset = layer_offset(spec, layer);
  const int in = spec.layer_input(layer);
  const int out = spec.layer_output(layer);
  const double* base = params.values.data() + offset;
  return LayerView{Eigen::Map<const Eigen::MatrixXd>(base, out, in),
                   Eigen::Map<const Eigen::VectorXd>(base + static_cast<std::ptrdiff_t>(in) * out, out)};
}

ParamVector mlp_init(const MlpSpec& spec, Rng& rng) {
  spec.validate();
  ParamVector params = ParamVector::zeros(spec.parameter_count());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.layer_input(l);
    const int out = spec.layer_output(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    const std::size_t n_weights = static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
    for (std::size_t k = 0; k < n_weights; ++k) {
      params.values[static_cast<Eigen::Index>(offset + k)] = rng.uniform(-bound, bound);
    }
    offset += n_weights + static_cast<std::size_t>(out);
  }
  return params;
}

ForwardPass mlp_forward_pass(const ParamVector& params, const MlpSpec& spec, const Eigen::MatrixXd& inputs) {
  check_params(params, spec);
  if (inputs.rows() != spec.input_dim) {
    throw std::invalid_argument("mlp_forward: input has " + std::to_string(inputs.rows()) + " rows, expected " +
                                std::to_string(spec.input_dim));
  }
  ForwardPass pass;
  pass.post.reserve(spec.layer_count() + 1);
  pass.post.push_back(inputs);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const LayerView layer = layer_view(params, spec, l);
    Eigen::MatrixXd z = layer.weight * pass.post.back();
    z.colwise() += layer.bias;
    apply_activation(z, activation_for_layer(spec, l));
    pass.post.push_back(std::move(z));
  }
  return pass;
}

Eigen::MatrixXd mlp_forward_batch(const ParamVector& params, const MlpSpec& spec, const Eigen::MatrixXd& inputs) {
  return std::move(mlp_forward_pass(params, spec, inputs).post.back());
}

Eigen::VectorXd mlp_forward(const ParamVector& params, const MlpSpec& spec, const Eigen::VectorXd& input) {
  return mlp_forward_batch(params, spec, Eigen::MatrixXd(input)).col(0);
}

MlpGradients mlp_backward(const ForwardPass& pass, const ParamVector& params, const MlpSpec& spec,
                          const Eigen::MatrixXd& cotangent) {
  check_params(params, spec);
  if (pass.post.size() != spec.layer_count() + 1) throw std::invalid_argument("mlp_backward: forward pass mismatch");
  if (cotangent.rows() != spec.output_dim || cotangent.cols() != pass.output().cols()) {
    throw std::invalid_argument("mlp_backward: cotangent shape does not match network output");
  }
  MlpGradients grads{ParamVector::zeros(params.size()), Eigen::MatrixXd()};
  Eigen::MatrixXd delta = cotangent;
  for (std::size_t l = spec.layer_count(); l-- > 0;) {
    apply_activation_derivative(delta, pass.post[l + 1], activation_for_layer(spec, l));
    const std::size_t offset = layer_offset(spec, l);
    const int in = spec.layer_input(l);
    const int out = spec.layer_output(l);
    double* base = grads.params.values.data() + offset;
    Eigen::Map<Eigen::MatrixXd>(base, out, in).noalias() = delta * pass.post[l].transpose();
    Eigen::Map<Eigen::VectorXd>(base + static_cast<std::ptrdiff_t>(in) * out, out) = delta.rowwise().sum();
    const LayerView layer = layer_view(params, spec, l);
    delta = layer.weight.transpose() * delta;
  }
  grads.inputs = std::move(delta);
  return grads;
}

MlpGradients mlp_backward(const ParamVector& params, const MlpSpec& spec, const Eigen::VectorXd& input,
                          const Eigen::VectorXd& output_cotangent) {
  const ForwardPass pass = mlp_forward_pass(params, spec, Eigen::MatrixXd(input));
  if (output_cotangent.size() != spec.output_dim) {
    throw std::invalid_argument("mlp_backward: cotangent length does not match output_dim");
  }
  return mlp_backward(pass, params, spec, Eigen::MatrixXd(output_cotangent));
}

AdamState AdamState::for_size(std::size_t n, double learning_rate) {
  AdamState s;
  s.first_moment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  s.second_moment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  s.learning_rate = learning_rate;
  return s;
}

void AdamState::validate() const {
  if (first_moment.size() != second_moment.size()) throw std::invalid_argument("AdamState: moment sizes differ");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("AdamState: betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("AdamState: epsilon must be positive");
}

void adam_step(ParamVector& params, const ParamVector& grads, AdamState& state) {
  state.validate();
  if (params.size() != grads.size() || static_cast<std::size_t>(state.first_moment.size()) != params.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment lengths differ");
  }
  for (Eigen::Index k = 0; k < grads.values.size(); ++k) {
    if (!std::isfinite(grads.values[k])) {
      throw NumericalError("adam_step: non-finite gradient at coordinate " + std::to_string(k));
    }
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads.values;
  state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.values.cwiseAbs2();
  const Eigen::ArrayXd m_hat = state.first_moment.array() / correction1;
  const Eigen::ArrayXd v_hat = state.second_moment.array() / correction2;
  params.values.array() -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
}

ParamVector soft_update(const ParamVector& target, const ParamVector& online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau must lie in [0, 1]");
  const ParamVector* parts[] = {&online, &target};
  const double weights[] = {tau, 1.0 - tau};
  return param_weighted_sum(weights, parts);
}

ParamVector param_weighted_sum(std::span<const double> weights, std::span<const ParamVector* const> params_list) {
  if (weights.size() != params_list.size()) {
    throw std::invalid_argument("param_weighted_sum: weights and parameter list lengths differ");
  }
  if (params_list.empty()) throw std::invalid_argument("param_weighted_sum: empty parameter list");
  const std::size_t n = params_list.front()->size();
  for (const ParamVector* p : params_list) {
    if (p->size() != n) throw std::invalid_argument("param_weighted_sum: parameter vectors differ in length");
  }
  ParamVector out;
  bool started = false;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] == 0.0) continue;
    if (!started) {
      out.values = weights[j] == 1.0 ? params_list[j]->values : Eigen::VectorXd(weights[j] * params_list[j]->values);
      started = true;
    } else {
      out.values += weights[j] * params_list[j]->values;
    }
  }
  if (!started) out = ParamVector::zeros(n);
  return out;
}

ParamVector param_weighted_sum(std::span<const double> weights, std::span<const ParamVector> params_list) {
  std::vector<const ParamVector*> ptrs;
  ptrs.reserve(params_list.size());
  for (const ParamVector& p : params_list) ptrs.push_back(&p);
  return param_weighted_sum(weights, std::span<const ParamVector* const>(ptrs));
}

namespace {
constexpr std::uint8_t kLittleEndianTag = 1;
}

void save_network(std::ostream& out, const MlpSpec& spec, const ParamVector& params) {
  check_params(params, spec);
  BinaryWriter w(out);
  w.magic("DMNN");
  w.u32(kNetworkFormatVersion);
  w.u8(kLittleEndianTag);
  w.u32(static_cast<std::uint32_t>(spec.input_dim));
  w.u32(static_cast<std::uint32_t>(spec.hidden_dims.size()));
  for (int h : spec.hidden_dims) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(spec.output_dim));
  w.u8(static_cast<std::uint8_t>(spec.hidden_activation));
  w.u8(static_cast<std::uint8_t>(spec.output_activation));
  w.f64s(params.span());
}

LoadedNetwork load_network(std::istream& in) {
  BinaryReader r(in);
  r.expect_magic("DMNN");
  const std::uint32_t version = r.u32();
  if (version != kNetworkFormatVersion) {
    throw std::runtime_error("network container: unsupported format version " + std::to_string(version));
  }
  if (r.u8() != kLittleEndianTag) throw std::runtime_error("network container: unsupported byte order");
  LoadedNetwork net;
  net.spec.input_dim = static_cast<int>(r.u32());
  const std::uint32_t n_hidden = r.u32();
  if (n_hidden > 1024) throw std::runtime_error("network container: implausible layer count");
  for (std::uint32_t k = 0; k < n_hidden; ++k) net.spec.hidden_dims.push_back(static_cast<int>(r.u32()));
  net.spec.output_dim = static_cast<int>(r.u32());
  net.spec.hidden_activation = static_cast<Activation>(r.u8());
  net.spec.output_activation = static_cast<Activation>(r.u8());
  if (net.spec.hidden_activation > Activation::tanh || net.spec.output_activation > Activation::tanh) {
    throw std::runtime_error("network container: unknown activation code");
  }
  net.spec.validate();
  const std::vector<double> values = r.f64_vector();
  if (values.size() != net.spec.parameter_count()) {
    throw std::runtime_error("network container: parameter count does not match spec");
  }
  net.params.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return net;
}

void save_adam(std::ostream& out, const AdamState& state) {
  BinaryWriter w(out);
  w.magic("DMAD");
  w.u32(kNetworkFormatVersion);
  w.u64(state.step_count);
  w.f64(state.learning_rate);
  w.f64(state.beta1);
  w.f64(state.beta2);
  w.f64(state.epsilon);
  w.f64s({state.first_moment.data(), static_cast<std::size_t>(state.first_moment.size())});
  w.f64s({state.second_moment.data(), static_cast<std::size_t>(state.second_moment.size())});
}

AdamState load_adam(std::istream& in) {
  BinaryReader r(in);
  r.expect_magic("DMAD");
  if (r.u32() != kNetworkFormatVersion) throw std::runtime_error("optimizer container: unsupported format version");
  AdamState s;
  s.step_count = r.u64();
  s.learning_rate = r.f64();
  s.beta1 = r.f64();
  s.beta2 = r.f64();
  s.epsilon = r.f64();
  const std::vector<double> m = r.f64_vector();
  const std::vector<double> v = r.f64_vector();
  s.first_moment = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
  s.second_moment = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  s.validate();
  return s;
}

}  // namespace dmaddpg
