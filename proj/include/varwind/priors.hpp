#pragma once

#include <random>
#include <string>

#include "varwind/nn.hpp"

namespace varwind::priors {

inline constexpr std::size_t kHiddenWidth = 128;
inline constexpr std::size_t kLatentWidth = 20;

// Convolutional auto-encoder over (B, C, T) windows:
//   enc1 (C->128) -> lrelu -> enc2 (128->20)
//   dec1 (20->128) -> lrelu -> dec2 (128->C) -> lrelu
struct ConvAE {
  nn::Conv1dLayer enc1, enc2, dec1, dec2;

  static void init(nn::ParamSet& params, const std::string& prefix, std::size_t channels, std::mt19937_64& rng);
  static ConvAE bind(const nn::BoundParams& params, const std::string& prefix);

  std::size_t channels() const { return enc1.in_channels(); }
  nn::Var encode(const nn::Var& x) const;
  nn::Var decode(const nn::Var& z) const;
  nn::Var operator()(const nn::Var& x) const;
};

// Fully connected auto-encoder applied to single time steps (N, C), with the
// rectifier after every layer.
struct FcAE {
  nn::LinearLayer enc1, enc2, dec1, dec2;

  static void init(nn::ParamSet& params, const std::string& prefix, std::size_t channels, std::mt19937_64& rng);
  static FcAE bind(const nn::BoundParams& params, const std::string& prefix);

  std::size_t channels() const { return enc1.weight.shape()[1]; }
  nn::Var operator()(const nn::Var& x) const;
};

}  // namespace varwind::priors
