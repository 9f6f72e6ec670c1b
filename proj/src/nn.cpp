#include "varwind/nn.hpp"

#include <cmath>

#include "varwind/errors.hpp"

namespace varwind::nn {

BoundParams::BoundParams(const ParamSet& params, ad::Tape* tape) {
  for (const auto& [path, value] : params) {
    vars_.emplace(path, tape != nullptr ? tape->variable(value) : ad::constant(value));
  }
}

const Var& BoundParams::at(const std::string& path) const {
  auto it = vars_.find(path);
  if (it == vars_.end()) throw InvalidArgument("missing parameter '" + path + "'");
  return it->second;
}

namespace {

Array uniform(std::mt19937_64& rng, ad::Shape shape, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(ad::numel(shape));
  for (double& x : v) x = dist(rng);
  return Array(std::move(shape), std::move(v));
}

}  // namespace

void init_conv1d(ParamSet& params, const std::string& prefix, std::size_t in_channels,
                 std::size_t out_channels, std::size_t kernel_size, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel_size));
  params[prefix + ".weight"] = uniform(rng, {out_channels, in_channels, kernel_size}, bound);
  params[prefix + ".bias"] = Array::zeros({out_channels});
}

void init_linear(ParamSet& params, const std::string& prefix, std::size_t in_features,
                 std::size_t out_features, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
  params[prefix + ".weight"] = uniform(rng, {out_features, in_features}, bound);
  params[prefix + ".bias"] = Array::zeros({out_features});
}

Var conv1d(const Var& x, const Var& weight, const Var& bias) {
  if (x.shape().size() != 3 || x.shape()[1] != weight.shape()[1]) {
    throw ShapeError("conv1d layer expects (B, " + std::to_string(weight.shape()[1]) + ", T) input, got " +
                     ad::to_string(x.shape()));
  }
  Var y = ad::conv1d(x, weight);
  return y + ad::broadcast_channels(bias, y.shape());
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  if (x.shape().size() != 2 || x.shape()[1] != weight.shape()[1]) {
    throw ShapeError("linear layer expects (B, " + std::to_string(weight.shape()[1]) + ") input, got " +
                     ad::to_string(x.shape()));
  }
  Var y = ad::matmul(x, weight, false, true);
  return y + ad::broadcast_channels(bias, y.shape());
}

Var leaky_relu(const Var& x, double slope) { return ad::leaky_relu(x, slope); }

Conv1dLayer Conv1dLayer::bind(const BoundParams& params, const std::string& prefix) {
  return {params.at(prefix + ".weight"), params.at(prefix + ".bias")};
}

Var Conv1dLayer::operator()(const Var& x) const { return conv1d(x, weight, bias); }

LinearLayer LinearLayer::bind(const BoundParams& params, const std::string& prefix) {
  return {params.at(prefix + ".weight"), params.at(prefix + ".bias")};
}

Var LinearLayer::operator()(const Var& x) const { return linear(x, weight, bias); }

void ConvLstmCell::init(ParamSet& params, const std::string& prefix, std::size_t input_channels,
                        std::size_t hidden_channels, std::mt19937_64& rng) {
  init_conv1d(params, prefix + ".gates", input_channels + hidden_channels, 4 * hidden_channels, kKernelSize,
              rng);
}

ConvLstmCell ConvLstmCell::bind(const BoundParams& params, const std::string& prefix) {
  ConvLstmCell cell;
  cell.gates = Conv1dLayer::bind(params, prefix + ".gates");
  if (cell.gates.out_channels() % 4 != 0) throw ShapeError("ConvLSTM gate count must be a multiple of 4");
  cell.hidden = cell.gates.out_channels() / 4;
  return cell;
}

LstmState ConvLstmCell::zero_state(std::size_t batch, std::size_t steps) const {
  return {ad::constant(Array::zeros({batch, hidden, steps})), ad::constant(Array::zeros({batch, hidden, steps}))};
}

LstmState ConvLstmCell::step(const Var& input, const LstmState& state) const {
  const ad::Shape& in = input.shape();
  if (in.size() != 3 || in[1] != input_channels()) {
    throw ShapeError("ConvLSTM expects (B, " + std::to_string(input_channels()) + ", T) input, got " +
                     ad::to_string(in));
  }
  const ad::Shape hidden_shape{in[0], hidden, in[2]};
  if (state.h.shape() != hidden_shape || state.c.shape() != hidden_shape) {
    throw ShapeError("ConvLSTM state must be " + ad::to_string(hidden_shape));
  }
  Var z = gates(ad::concat_channels({input, state.h}));
  Var i = ad::sigmoid(ad::slice_channels(z, 0, hidden));
  Var f = ad::sigmoid(ad::slice_channels(z, hidden, 2 * hidden));
  Var o = ad::sigmoid(ad::slice_channels(z, 2 * hidden, 3 * hidden));
  Var g = ad::tanh(ad::slice_channels(z, 3 * hidden, 4 * hidden));
  Var c = f * state.c + i * g;
  Var h = o * ad::tanh(c);
  return {h, c};
}

void adam_step(ParamSet& params, const std::map<std::string, Array>& grads, AdamState& state) {
  const AdamConfig& cfg = state.config;
  for (const auto& [path, g] : grads) {
    auto p = params.find(path);
    if (p == params.end()) throw InvalidArgument("adam_step: unknown parameter '" + path + "'");
    if (p->second.shape() != g.shape()) throw ShapeError("adam_step: gradient shape mismatch for '" + path + "'");
    if (!g.all_finite()) throw NumericalError("adam_step: non-finite gradient for '" + path + "'");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& [path, g] : grads) {
    Array& theta = params.at(path);
    auto& m = state.first_moment[path];
    auto& v = state.second_moment[path];
    if (m.empty()) {
      m.assign(g.size(), 0.0);
      v.assign(g.size(), 0.0);
    }
    std::vector<double> updated = theta.to_vector();
    for (std::size_t i = 0; i < updated.size(); ++i) {
      const double gi = g[i] + cfg.weight_decay * updated[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      updated[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
    theta = Array(theta.shape(), std::move(updated));
  }
}

}  // namespace varwind::nn
