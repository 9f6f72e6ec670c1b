#pragma once

// Loop-based auto-encoder evaluation for tests. Besides the output it reports
// how close any rectifier input came to zero: a central difference that
// straddles the kink is not a valid gradient oracle, so FD checks redraw such
// instances.

#include <algorithm>
#include <limits>
#include <string>

#include "support.hpp"
#include "varwind/nn.hpp"

namespace vwtest {

struct AeEval {
  std::vector<double> output;
  double min_abs_preactivation = std::numeric_limits<double>::infinity();
};

inline void rectify(std::vector<double>& v, double& closest) {
  for (double& x : v) {
    closest = std::min(closest, std::abs(x));
    x = x > 0 ? x : 0.1 * x;
  }
}

inline AeEval naive_conv_ae(const varwind::nn::ParamSet& p, const std::string& prefix, const Array& x) {
  auto layer = [&](const Array& in, const std::string& name) {
    const Array& w = p.at(prefix + "." + name + ".weight");
    std::vector<double> out = naive_conv1d(in, w, p.at(prefix + "." + name + ".bias").to_vector());
    return Array({in.dim(0), w.dim(0), in.dim(2)}, std::move(out));
  };
  AeEval r;
  std::vector<double> h = layer(x, "enc1").to_vector();
  rectify(h, r.min_abs_preactivation);
  Array a = layer(Array({x.dim(0), 128, x.dim(2)}, h), "enc2");
  h = layer(a, "dec1").to_vector();
  rectify(h, r.min_abs_preactivation);
  h = layer(Array({x.dim(0), 128, x.dim(2)}, h), "dec2").to_vector();
  rectify(h, r.min_abs_preactivation);
  r.output = std::move(h);
  return r;
}

inline AeEval naive_fc_ae(const varwind::nn::ParamSet& p, const std::string& prefix, const Array& x) {
  AeEval r;
  Array h = x;
  for (const char* name : {"enc1", "enc2", "dec1", "dec2"}) {
    const Array& w = p.at(prefix + "." + name + ".weight");
    std::vector<double> v = naive_linear(h, w, p.at(prefix + "." + name + ".bias").to_vector());
    rectify(v, r.min_abs_preactivation);
    h = Array({x.dim(0), w.dim(0)}, std::move(v));
  }
  r.output = h.to_vector();
  return r;
}

}  // namespace vwtest
