#include "varwind/priors.hpp"

#include "varwind/errors.hpp"

namespace varwind::priors {

using nn::Var;

void ConvAE::init(nn::ParamSet& params, const std::string& prefix, std::size_t channels, std::mt19937_64& rng) {
  if (channels == 0) throw InvalidArgument("ConvAE needs at least one channel");
  nn::init_conv1d(params, prefix + ".enc1", channels, kHiddenWidth, nn::kKernelSize, rng);
  nn::init_conv1d(params, prefix + ".enc2", kHiddenWidth, kLatentWidth, nn::kKernelSize, rng);
  nn::init_conv1d(params, prefix + ".dec1", kLatentWidth, kHiddenWidth, nn::kKernelSize, rng);
  nn::init_conv1d(params, prefix + ".dec2", kHiddenWidth, channels, nn::kKernelSize, rng);
}

ConvAE ConvAE::bind(const nn::BoundParams& params, const std::string& prefix) {
  return {nn::Conv1dLayer::bind(params, prefix + ".enc1"), nn::Conv1dLayer::bind(params, prefix + ".enc2"),
          nn::Conv1dLayer::bind(params, prefix + ".dec1"), nn::Conv1dLayer::bind(params, prefix + ".dec2")};
}

Var ConvAE::encode(const Var& x) const { return enc2(nn::leaky_relu(enc1(x))); }

Var ConvAE::decode(const Var& z) const { return nn::leaky_relu(dec2(nn::leaky_relu(dec1(z)))); }

Var ConvAE::operator()(const Var& x) const { return decode(encode(x)); }

void FcAE::init(nn::ParamSet& params, const std::string& prefix, std::size_t channels, std::mt19937_64& rng) {
  if (channels == 0) throw InvalidArgument("FcAE needs at least one channel");
  nn::init_linear(params, prefix + ".enc1", channels, kHiddenWidth, rng);
  nn::init_linear(params, prefix + ".enc2", kHiddenWidth, kLatentWidth, rng);
  nn::init_linear(params, prefix + ".dec1", kLatentWidth, kHiddenWidth, rng);
  nn::init_linear(params, prefix + ".dec2", kHiddenWidth, channels, rng);
}

FcAE FcAE::bind(const nn::BoundParams& params, const std::string& prefix) {
  return {nn::LinearLayer::bind(params, prefix + ".enc1"), nn::LinearLayer::bind(params, prefix + ".enc2"),
          nn::LinearLayer::bind(params, prefix + ".dec1"), nn::LinearLayer::bind(params, prefix + ".dec2")};
}

Var FcAE::operator()(const Var& x) const {
  Var h = nn::leaky_relu(enc1(x));
  h = nn::leaky_relu(enc2(h));
  h = nn::leaky_relu(dec1(h));
  return nn::leaky_relu(dec2(h));
}

}  // namespace varwind::priors
