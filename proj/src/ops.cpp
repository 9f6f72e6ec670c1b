#include <cmath>

#include "varwind/autodiff.hpp"
#include "varwind/errors.hpp"
#include "varwind/kernels.hpp"

// Every backward rule below is expressed with recorded primitives so that a
// reverse pass run with create_graph can itself be differentiated.

namespace varwind::ad {

namespace k = varwind::kernels;

Var add(const Var& a, const Var& b) {
  return make_result("add", k::add(a.value(), b.value()), {a, b},
                     [](const Var&, const Var& g, const std::vector<bool>&) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  return make_result("sub", k::sub(a.value(), b.value()), {a, b},
                     [](const Var&, const Var& g, const std::vector<bool>& needs) {
                       return std::vector<Var>{g, needs[1] ? affine(g, -1.0) : Var{}};
                     });
}

Var mul(const Var& a, const Var& b) {
  return make_result("mul", k::mul(a.value(), b.value()), {a, b},
                     [a, b](const Var&, const Var& g, const std::vector<bool>& needs) {
                       return std::vector<Var>{needs[0] ? mul(g, b) : Var{}, needs[1] ? mul(g, a) : Var{}};
                     });
}

Var affine(const Var& a, double c, double d) {
  return make_result("affine", k::affine(a.value(), c, d), {a},
                     [c](const Var&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{affine(g, c)};
                     });
}

Var mul_const(const Var& a, const Array& m) {
  return make_result("mul_const", k::mul(a.value(), m), {a},
                     [m](const Var&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{mul_const(g, m)};
                     });
}

Var sum(const Var& a) {
  const Shape shape = a.shape();
  return make_result("sum", k::sum(a.value()), {a},
                     [shape](const Var&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{expand(g, shape)};
                     });
}

Var expand(const Var& s, const Shape& shape) {
  return make_result("expand", k::expand(s.value(), shape), {s},
                     [source = s.shape()](const Var&, const Var& g, const std::vector<bool>&) {
                       Var total = sum(g);
                       return std::vector<Var>{total.shape() == source ? total : reshape(total, source)};
                     });
}

Var reshape(const Var& a, const Shape& shape) {
  if (numel(shape) != a.value().size()) {
    throw ShapeError("reshape: " + to_string(a.shape()) + " to " + to_string(shape));
  }
  return make_result("reshape", Array(shape, a.value().to_vector()), {a},
                     [source = a.shape()](const Var&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{reshape(g, source)};
                     });
}

Var masked_sq_norm(const Var& a, const Array& mask) {
  return make_result("masked_sq_norm", k::masked_sq_norm(a.value(), mask), {a},
                     [a, mask](const Var&, const Var& g, const std::vector<bool>&) {
                       Var twice = affine(a, 2.0);
                       if (mask.size() != 0) twice = mul_const(twice, mask);
                       return std::vector<Var>{mul(expand(g, a.shape()), twice)};
                     });
}

Var sum_squares(const Var& a) { return masked_sq_norm(a, Array()); }

Var matmul(const Var& a, const Var& b, bool ta, bool tb) {
  return make_result(
      "matmul", k::matmul(a.value(), b.value(), ta, tb), {a, b},
      [a, b, ta, tb](const Var&, const Var& g, const std::vector<bool>& needs) {
        Var ga, gb;
        if (!ta && !tb) {
          if (needs[0]) ga = matmul(g, b, false, true);
          if (needs[1]) gb = matmul(a, g, true, false);
        } else if (!ta && tb) {
          if (needs[0]) ga = matmul(g, b, false, false);
          if (needs[1]) gb = matmul(g, a, true, false);
        } else if (ta && !tb) {
          if (needs[0]) ga = matmul(b, g, false, true);
          if (needs[1]) gb = matmul(a, g, false, false);
        } else {
          if (needs[0]) ga = matmul(b, g, true, true);
          if (needs[1]) gb = matmul(g, a, true, true);
        }
        return std::vector<Var>{ga, gb};
      });
}

Var conv1d(const Var& x, const Var& w) {
  return make_result("conv1d", k::conv1d(x.value(), w.value()), {x, w},
                     [x, w](const Var&, const Var& g, const std::vector<bool>& needs) {
                       return std::vector<Var>{needs[0] ? conv1d_transpose(g, w) : Var{},
                                               needs[1] ? conv1d_weight_grad(x, g, w.shape()[2]) : Var{}};
                     });
}

Var conv1d_transpose(const Var& u, const Var& w) {
  return make_result("conv1d_transpose", k::conv1d_transpose(u.value(), w.value()), {u, w},
                     [u, w](const Var&, const Var& g, const std::vector<bool>& needs) {
                       return std::vector<Var>{needs[0] ? conv1d(g, w) : Var{},
                                               needs[1] ? conv1d_weight_grad(g, u, w.shape()[2]) : Var{}};
                     });
}

Var conv1d_weight_grad(const Var& x, const Var& u, std::size_t kernel_size) {
  return make_result("conv1d_weight_grad", k::conv1d_weight_grad(x.value(), u.value(), kernel_size), {x, u},
                     [x, u](const Var&, const Var& g, const std::vector<bool>& needs) {
                       return std::vector<Var>{needs[0] ? conv1d_transpose(u, g) : Var{},
                                               needs[1] ? conv1d(x, g) : Var{}};
                     });
}

Var broadcast_channels(const Var& b, const Shape& shape) {
  return make_result("broadcast_channels", k::broadcast_channels(b.value(), shape), {b},
                     [](const Var&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{sum_channels(g)};
                     });
}

Var sum_channels(const Var& a) {
  return make_result("sum_channels", k::sum_channels(a.value()), {a},
                     [shape = a.shape()](const Var&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{broadcast_channels(g, shape)};
                     });
}

Var leaky_relu(const Var& a, double slope) {
  return make_result("leaky_relu", k::leaky_relu(a.value(), slope), {a},
                     [a, slope](const Var&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{leaky_relu_backward(g, a, slope)};
                     });
}

// The local slope is piecewise constant in `a`, so only `g` receives a gradient.
Var leaky_relu_backward(const Var& g, const Var& a, double slope) {
  return make_result("leaky_relu_backward", k::leaky_relu_backward(g.value(), a.value(), slope), {g, a},
                     [a, slope](const Var&, const Var& gg, const std::vector<bool>& needs) {
                       return std::vector<Var>{needs[0] ? leaky_relu_backward(gg, a, slope) : Var{}, Var{}};
                     });
}

Var sigmoid(const Var& a) {
  return make_result("sigmoid", k::sigmoid(a.value()), {a},
                     [](const Var& out, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{sigmoid_backward(g, out)};
                     });
}

// g * s * (1 - s)
Var sigmoid_backward(const Var& g, const Var& s) {
  return make_result("sigmoid_backward", k::sigmoid_backward(g.value(), s.value()), {g, s},
                     [g, s](const Var&, const Var& gg, const std::vector<bool>& needs) {
                       return std::vector<Var>{needs[0] ? sigmoid_backward(gg, s) : Var{},
                                               needs[1] ? mul(mul(gg, g), affine(s, -2.0, 1.0)) : Var{}};
                     });
}

Var tanh(const Var& a) {
  return make_result("tanh", k::tanh(a.value()), {a}, [](const Var& out, const Var& g, const std::vector<bool>&) {
    return std::vector<Var>{tanh_backward(g, out)};
  });
}

// g * (1 - t^2)
Var tanh_backward(const Var& g, const Var& t) {
  return make_result("tanh_backward", k::tanh_backward(g.value(), t.value()), {g, t},
                     [g, t](const Var&, const Var& gg, const std::vector<bool>& needs) {
                       return std::vector<Var>{needs[0] ? tanh_backward(gg, t) : Var{},
                                               needs[1] ? mul(mul(gg, g), affine(t, -2.0)) : Var{}};
                     });
}

Var slice_channels(const Var& a, std::size_t begin, std::size_t end) {
  return make_result("slice_channels", k::slice_channels(a.value(), begin, end), {a},
                     [channels = a.shape()[1], begin](const Var&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{embed_channels(g, channels, begin)};
                     });
}

Var embed_channels(const Var& a, std::size_t channels, std::size_t begin) {
  return make_result("embed_channels", k::embed_channels(a.value(), channels, begin), {a},
                     [begin, width = a.shape()[1]](const Var&, const Var& g, const std::vector<bool>&) {
                       return std::vector<Var>{slice_channels(g, begin, begin + width)};
                     });
}

Var concat_channels(const std::vector<Var>& parts) {
  std::vector<const Array*> values;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    values.push_back(&p.value());
    offsets.push_back(offset);
    if (p.shape().size() < 2) throw ShapeError("concat_channels: rank must be >= 2");
    offset += p.shape()[1];
  }
  Array out = k::concat_channels(values);
  std::vector<std::size_t> widths;
  for (const Var& p : parts) widths.push_back(p.shape()[1]);
  return make_result("concat_channels", std::move(out), parts,
                     [offsets, widths](const Var&, const Var& g, const std::vector<bool>& needs) {
                       std::vector<Var> grads(offsets.size());
                       for (std::size_t i = 0; i < offsets.size(); ++i) {
                         if (needs[i]) grads[i] = slice_channels(g, offsets[i], offsets[i] + widths[i]);
                       }
                       return grads;
                     });
}

}  // namespace varwind::ad
