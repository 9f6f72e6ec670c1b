#pragma once

// Plain Array -> Array numerical kernels behind the autodiff primitives.

#include <cstddef>

#include "varwind/autodiff.hpp"

namespace varwind::kernels {

using ad::Array;
using ad::Shape;

Array add(const Array& a, const Array& b);
Array sub(const Array& a, const Array& b);
Array mul(const Array& a, const Array& b);
Array affine(const Array& a, double c, double d);
Array sum(const Array& a);
Array expand(const Array& s, const Shape& shape);
Array masked_sq_norm(const Array& a, const Array& mask);

Array matmul(const Array& a, const Array& b, bool transpose_a, bool transpose_b);

Array conv1d(const Array& x, const Array& w);
Array conv1d_transpose(const Array& u, const Array& w);
Array conv1d_weight_grad(const Array& x, const Array& u, std::size_t kernel_size);

Array broadcast_channels(const Array& b, const Shape& shape);
Array sum_channels(const Array& a);

Array leaky_relu(const Array& a, double slope);
Array leaky_relu_backward(const Array& g, const Array& a, double slope);
Array sigmoid(const Array& a);
Array sigmoid_backward(const Array& g, const Array& s);
Array tanh(const Array& a);
Array tanh_backward(const Array& g, const Array& t);

Array slice_channels(const Array& a, std::size_t begin, std::size_t end);
Array embed_channels(const Array& a, std::size_t channels, std::size_t begin);
Array concat_channels(const std::vector<const Array*>& parts);

}  // namespace varwind::kernels
