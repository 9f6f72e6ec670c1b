#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "varwind/autodiff.hpp"

namespace varwind::nn {

using ad::Array;
using ad::Var;

inline constexpr double kLeakySlope = 0.1;
inline constexpr std::size_t kKernelSize = 3;

// Trainable tensors keyed by dotted path ("phi.enc1.weight").
using ParamSet = std::map<std::string, Array>;

// Parameters wrapped as Vars for one forward/backward pass.
class BoundParams {
 public:
  BoundParams() = default;
  // Trainable entries become tape variables; with `tape == nullptr` all are constants.
  BoundParams(const ParamSet& params, ad::Tape* tape);

  const Var& at(const std::string& path) const;
  const std::map<std::string, Var>& vars() const { return vars_; }

 private:
  std::map<std::string, Var> vars_;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero bias.
void init_conv1d(ParamSet& params, const std::string& prefix, std::size_t in_channels,
                 std::size_t out_channels, std::size_t kernel_size, std::mt19937_64& rng);
void init_linear(ParamSet& params, const std::string& prefix, std::size_t in_features,
                 std::size_t out_features, std::mt19937_64& rng);

// Kernel-3, zero-padded, stride-1 convolution over time. Weight (out, in, k), bias (out).
struct Conv1dLayer {
  Var weight;
  Var bias;

  static Conv1dLayer bind(const BoundParams& params, const std::string& prefix);
  std::size_t in_channels() const { return weight.shape()[1]; }
  std::size_t out_channels() const { return weight.shape()[0]; }
  // (B, in, T) -> (B, out, T)
  Var operator()(const Var& x) const;
};

// Affine map over the feature axis. Weight (out, in), bias (out).
struct LinearLayer {
  Var weight;
  Var bias;

  static LinearLayer bind(const BoundParams& params, const std::string& prefix);
  // (B, in) -> (B, out)
  Var operator()(const Var& x) const;
};

Var conv1d(const Var& x, const Var& weight, const Var& bias);
Var linear(const Var& x, const Var& weight, const Var& bias);
Var leaky_relu(const Var& x, double slope = kLeakySlope);

struct LstmState {
  Var h;
  Var c;
};

// Convolutional LSTM over the time axis. The gate convolution maps
// [input; h] to 4*hidden channels ordered (input, forget, output, candidate).
struct ConvLstmCell {
  Conv1dLayer gates;
  std::size_t hidden = 0;

  static void init(ParamSet& params, const std::string& prefix, std::size_t input_channels,
                   std::size_t hidden_channels, std::mt19937_64& rng);
  static ConvLstmCell bind(const BoundParams& params, const std::string& prefix);

  std::size_t input_channels() const { return gates.in_channels() - hidden; }
  LstmState zero_state(std::size_t batch, std::size_t steps) const;
  LstmState step(const Var& input, const LstmState& state) const;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
};

// One Adam update with bias correction over the parameters named in `grads`.
// Weight decay is added to the gradient (g + wd * theta) before the moments.
void adam_step(ParamSet& params, const std::map<std::string, Array>& grads, AdamState& state);

// ---- checkpoints -------------------------------------------------------------

struct Checkpoint {
  std::string config_hash;
  std::uint32_t epoch = 0;
  std::map<std::string, std::string> metadata;
  ParamSet tensors;
};

// Binary container: magic, version, config hash, epoch, string metadata, then
// (path, shape, raw little-endian float64 values) per tensor. Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace varwind::nn
