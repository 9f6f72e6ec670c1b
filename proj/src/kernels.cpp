#include "varwind/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "varwind/errors.hpp"

namespace varwind::kernels {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Array& a, const Array& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + ad::to_string(a.shape()) + " vs " +
                     ad::to_string(b.shape()));
  }
}

void require_rank(const Array& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     ad::to_string(a.shape()));
  }
}

template <class F>
Array map_unary(const Array& a, F f) {
  std::vector<double> out(a.size());
  const double* p = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(p[i]);
  return Array(a.shape(), std::move(out));
}

template <class F>
Array map_binary(const Array& a, const Array& b, const char* op, F f) {
  require_same_shape(a, b, op);
  std::vector<double> out(a.size());
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(pa[i], pb[i]);
  return Array(a.shape(), std::move(out));
}

// (B, C, T) -> (C, B*T)
std::vector<double> channels_major(const Array& a) {
  const std::size_t batch = a.dim(0), channels = a.dim(1), steps = a.dim(2);
  std::vector<double> out(a.size());
  const double* p = a.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(p + (b * channels + c) * steps, steps, out.data() + c * batch * steps + b * steps);
    }
  }
  return out;
}

// (C, B*T) -> (B, C, T)
Array batch_major(const std::vector<double>& m, std::size_t batch, std::size_t channels,
                  std::size_t steps) {
  std::vector<double> out(m.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(m.data() + c * batch * steps + b * steps, steps, out.data() + (b * channels + c) * steps);
    }
  }
  return Array({batch, channels, steps}, std::move(out));
}

// Rows (i, k), columns (b, t): x[b, i, t + k - pad], zero outside.
std::vector<double> im2col(const Array& x, std::size_t kernel) {
  const std::size_t batch = x.dim(0), channels = x.dim(1), steps = x.dim(2);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kernel / 2);
  const std::size_t cols = batch * steps;
  std::vector<double> out(channels * kernel * cols, 0.0);
  const double* p = x.data();
  for (std::size_t i = 0; i < channels; ++i) {
    for (std::size_t k = 0; k < kernel; ++k) {
      double* row = out.data() + (i * kernel + k) * cols;
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* src = p + (b * channels + i) * steps;
        double* dst = row + b * steps;
        for (std::size_t t = 0; t < steps; ++t) {
          const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t) + shift;
          if (s >= 0 && s < static_cast<std::ptrdiff_t>(steps)) dst[t] = src[s];
        }
      }
    }
  }
  return out;
}

// Inverse scatter of im2col: accumulates columns back onto (B, C, T).
Array col2im(const std::vector<double>& cols_mat, std::size_t batch, std::size_t channels,
             std::size_t steps, std::size_t kernel) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kernel / 2);
  const std::size_t cols = batch * steps;
  std::vector<double> out(batch * channels * steps, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < channels; ++i) {
      double* dst = out.data() + (b * channels + i) * steps;
      for (std::size_t k = 0; k < kernel; ++k) {
        const double* src = cols_mat.data() + (i * kernel + k) * cols + b * steps;
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
        for (std::size_t t = 0; t < steps; ++t) {
          const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t) + shift;
          if (s >= 0 && s < static_cast<std::ptrdiff_t>(steps)) dst[s] += src[t];
        }
      }
    }
  }
  return Array({batch, channels, steps}, std::move(out));
}

void check_conv_weight(const Array& w, const char* op) {
  require_rank(w, 3, op);
  if (w.dim(2) % 2 == 0) throw ShapeError(std::string(op) + ": kernel size must be odd");
}

}  // namespace

Array add(const Array& a, const Array& b) {
  return map_binary(a, b, "add", [](double x, double y) { return x + y; });
}

Array sub(const Array& a, const Array& b) {
  return map_binary(a, b, "sub", [](double x, double y) { return x - y; });
}

Array mul(const Array& a, const Array& b) {
  return map_binary(a, b, "mul", [](double x, double y) { return x * y; });
}

Array affine(const Array& a, double c, double d) {
  return map_unary(a, [c, d](double x) { return c * x + d; });
}

Array sum(const Array& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return Array::scalar(s);
}

Array expand(const Array& s, const Shape& shape) {
  if (s.size() != 1) throw ShapeError("expand: source must hold a single element");
  return Array::filled(shape, s[0]);
}

Array masked_sq_norm(const Array& a, const Array& mask) {
  double s = 0.0;
  const double* p = a.data();
  if (mask.size() == 0) {
    for (std::size_t i = 0; i < a.size(); ++i) s += p[i] * p[i];
  } else {
    require_same_shape(a, mask, "masked_sq_norm");
    const double* m = mask.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (m[i] != 0.0) s += m[i] * p[i] * p[i];
    }
  }
  return Array::scalar(s);
}

Array matmul(const Array& a, const Array& b, bool transpose_a, bool transpose_b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = transpose_a ? a.dim(1) : a.dim(0);
  const std::size_t ka = transpose_a ? a.dim(0) : a.dim(1);
  const std::size_t kb = transpose_b ? b.dim(1) : b.dim(0);
  const std::size_t n = transpose_b ? b.dim(0) : b.dim(1);
  if (ka != kb) {
    throw ShapeError("matmul: inner dimensions differ " + ad::to_string(a.shape()) + " x " +
                     ad::to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  ConstMapMat ma(a.data(), a.dim(0), a.dim(1));
  ConstMapMat mb(b.data(), b.dim(0), b.dim(1));
  MapMat mc(out.data(), m, n);
  if (!transpose_a && !transpose_b) mc.noalias() = ma * mb;
  else if (!transpose_a) mc.noalias() = ma * mb.transpose();
  else if (!transpose_b) mc.noalias() = ma.transpose() * mb;
  else mc.noalias() = ma.transpose() * mb.transpose();
  return Array({m, n}, std::move(out));
}

Array conv1d(const Array& x, const Array& w) {
  require_rank(x, 3, "conv1d");
  check_conv_weight(w, "conv1d");
  const std::size_t batch = x.dim(0), in_ch = x.dim(1), steps = x.dim(2);
  const std::size_t out_ch = w.dim(0), kernel = w.dim(2);
  if (w.dim(1) != in_ch) {
    throw ShapeError("conv1d: input has " + std::to_string(in_ch) + " channels, weight expects " +
                     std::to_string(w.dim(1)));
  }
  const std::vector<double> cols = im2col(x, kernel);
  std::vector<double> y(out_ch * batch * steps);
  ConstMapMat mw(w.data(), out_ch, in_ch * kernel);
  ConstMapMat mc(cols.data(), in_ch * kernel, batch * steps);
  MapMat my(y.data(), out_ch, batch * steps);
  my.noalias() = mw * mc;
  return batch_major(y, batch, out_ch, steps);
}

Array conv1d_transpose(const Array& u, const Array& w) {
  require_rank(u, 3, "conv1d_transpose");
  check_conv_weight(w, "conv1d_transpose");
  const std::size_t batch = u.dim(0), out_ch = u.dim(1), steps = u.dim(2);
  const std::size_t in_ch = w.dim(1), kernel = w.dim(2);
  if (w.dim(0) != out_ch) throw ShapeError("conv1d_transpose: channel mismatch");
  const std::vector<double> um = channels_major(u);
  std::vector<double> cols(in_ch * kernel * batch * steps);
  ConstMapMat mw(w.data(), out_ch, in_ch * kernel);
  ConstMapMat mu(um.data(), out_ch, batch * steps);
  MapMat mc(cols.data(), in_ch * kernel, batch * steps);
  mc.noalias() = mw.transpose() * mu;
  return col2im(cols, batch, in_ch, steps, kernel);
}

Array conv1d_weight_grad(const Array& x, const Array& u, std::size_t kernel_size) {
  require_rank(x, 3, "conv1d_weight_grad");
  require_rank(u, 3, "conv1d_weight_grad");
  if (kernel_size % 2 == 0) throw ShapeError("conv1d_weight_grad: kernel size must be odd");
  if (x.dim(0) != u.dim(0) || x.dim(2) != u.dim(2)) {
    throw ShapeError("conv1d_weight_grad: batch/time mismatch " + ad::to_string(x.shape()) + " vs " +
                     ad::to_string(u.shape()));
  }
  const std::size_t batch = x.dim(0), in_ch = x.dim(1), steps = x.dim(2), out_ch = u.dim(1);
  const std::vector<double> cols = im2col(x, kernel_size);
  const std::vector<double> um = channels_major(u);
  std::vector<double> out(out_ch * in_ch * kernel_size);
  ConstMapMat mc(cols.data(), in_ch * kernel_size, batch * steps);
  ConstMapMat mu(um.data(), out_ch, batch * steps);
  MapMat mo(out.data(), out_ch, in_ch * kernel_size);
  mo.noalias() = mu * mc.transpose();
  return Array({out_ch, in_ch, kernel_size}, std::move(out));
}

Array broadcast_channels(const Array& b, const Shape& shape) {
  require_rank(b, 1, "broadcast_channels");
  if (shape.size() < 2 || shape[1] != b.dim(0)) {
    throw ShapeError("broadcast_channels: " + ad::to_string(b.shape()) + " onto " + ad::to_string(shape));
  }
  const std::size_t outer = shape[0], channels = shape[1];
  std::size_t inner = 1;
  for (std::size_t i = 2; i < shape.size(); ++i) inner *= shape[i];
  std::vector<double> out(outer * channels * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::fill_n(out.data() + (o * channels + c) * inner, inner, b[c]);
    }
  }
  return Array(shape, std::move(out));
}

Array sum_channels(const Array& a) {
  if (a.rank() < 2) throw ShapeError("sum_channels: rank must be >= 2");
  const std::size_t outer = a.dim(0), channels = a.dim(1), inner = a.size() / (outer * channels);
  std::vector<double> out(channels, 0.0);
  const double* p = a.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double* row = p + (o * channels + c) * inner;
      double s = 0.0;
      for (std::size_t i = 0; i < inner; ++i) s += row[i];
      out[c] += s;
    }
  }
  return Array({channels}, std::move(out));
}

Array leaky_relu(const Array& a, double slope) {
  return map_unary(a, [slope](double x) { return x > 0.0 ? x : slope * x; });
}

Array leaky_relu_backward(const Array& g, const Array& a, double slope) {
  return map_binary(g, a, "leaky_relu_backward",
                    [slope](double gv, double x) { return x > 0.0 ? gv : slope * gv; });
}

Array sigmoid(const Array& a) {
  return map_unary(a, [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

Array sigmoid_backward(const Array& g, const Array& s) {
  return map_binary(g, s, "sigmoid_backward", [](double gv, double sv) { return gv * sv * (1.0 - sv); });
}

Array tanh(const Array& a) {
  return map_unary(a, [](double x) { return std::tanh(x); });
}

Array tanh_backward(const Array& g, const Array& t) {
  return map_binary(g, t, "tanh_backward", [](double gv, double tv) { return gv * (1.0 - tv * tv); });
}

Array slice_channels(const Array& a, std::size_t begin, std::size_t end) {
  if (a.rank() < 2 || begin >= end || end > a.dim(1)) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of " + ad::to_string(a.shape()));
  }
  const std::size_t outer = a.dim(0), channels = a.dim(1), inner = a.size() / (outer * channels);
  const std::size_t width = end - begin;
  std::vector<double> out(outer * width * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(a.data() + (o * channels + begin) * inner, width * inner, out.data() + o * width * inner);
  }
  Shape shape = a.shape();
  shape[1] = width;
  return Array(std::move(shape), std::move(out));
}

Array embed_channels(const Array& a, std::size_t channels, std::size_t begin) {
  if (a.rank() < 2 || begin + a.dim(1) > channels) {
    throw ShapeError("embed_channels: " + ad::to_string(a.shape()) + " at " + std::to_string(begin) +
                     " into " + std::to_string(channels) + " channels");
  }
  const std::size_t outer = a.dim(0), width = a.dim(1), inner = a.size() / (outer * width);
  std::vector<double> out(outer * channels * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(a.data() + o * width * inner, width * inner, out.data() + (o * channels + begin) * inner);
  }
  Shape shape = a.shape();
  shape[1] = channels;
  return Array(std::move(shape), std::move(out));
}

Array concat_channels(const std::vector<const Array*>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape& first = parts.front()->shape();
  if (first.size() < 2) throw ShapeError("concat_channels: rank must be >= 2");
  const std::size_t outer = first[0];
  const std::size_t inner = parts.front()->size() / (outer * first[1]);
  std::size_t channels = 0;
  for (const Array* p : parts) {
    const Shape& s = p->shape();
    if (s.size() != first.size() || s[0] != outer || p->size() / (outer * s[1]) != inner) {
      throw ShapeError("concat_channels: incompatible " + ad::to_string(s) + " with " + ad::to_string(first));
    }
    channels += s[1];
  }
  std::vector<double> out(outer * channels * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    double* dst = out.data() + o * channels * inner;
    for (const Array* p : parts) {
      const std::size_t n = p->dim(1) * inner;
      std::copy_n(p->data() + o * n, n, dst);
      dst += n;
    }
  }
  Shape shape = first;
  shape[1] = channels;
  return Array(std::move(shape), std::move(out));
}

}  // namespace varwind::kernels
