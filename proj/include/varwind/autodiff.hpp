#pragma once

// Dense float64 reverse-mode differentiation.
//
// Values live in immutable `Array`s. Operations on `Var`s record a node on the
// thread's active `Tape` whenever an input requires a gradient. Every backward
// rule is itself written with recorded operations, so `grad(..., true)`
// returns gradients that can be differentiated again.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace varwind::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class Array {
 public:
  Array();
  Array(Shape shape, std::vector<double> values);

  static Array zeros(Shape shape);
  static Array filled(Shape shape, double value);
  static Array scalar(double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_->size(); }

  std::span<const double> values() const { return {values_->data(), values_->size()}; }
  const double* data() const { return values_->data(); }
  double operator[](std::size_t i) const { return (*values_)[i]; }
  // Value of a single-element array.
  double item() const;
  std::vector<double> to_vector() const { return *values_; }

  bool all_finite() const;

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> values_;
};

bool bitwise_equal(const Array& a, const Array& b);

struct Node;

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Array& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  const char* op() const;
  std::uint64_t tape_id() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Returns one gradient per parent. `needs[i]` is false when the caller does not
// want the gradient of parent i; an undefined Var stands for a zero gradient.
using BackwardFn = std::function<std::vector<Var>(const Var& out, const Var& grad_out,
                                                  const std::vector<bool>& needs)>;

struct Node {
  Array value;
  std::vector<Var> parents;
  BackwardFn backward;
  const char* op = "leaf";
  std::uint64_t tape_id = 0;
  std::uint64_t seq = 0;
  bool requires_grad = false;
};

struct TapeOptions {
  // Raise NumericalError (naming the op) as soon as a primitive yields NaN/Inf.
  bool check_finite = true;
};

// Recording context. Constructing a Tape makes it the active context of the
// calling thread until it is destroyed; tapes nest. A tape is single-owner.
class Tape {
 public:
  explicit Tape(TapeOptions options = {});
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that requires a gradient.
  Var variable(Array value);

  std::uint64_t id() const { return id_; }
  const TapeOptions& options() const { return options_; }

  static Tape* active();

 private:
  std::uint64_t id_;
  TapeOptions options_;
  Tape* previous_;
};

// Disables recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool recording_enabled();

Var constant(Array value);
Var constant_scalar(double value);
Var detach(const Var& v);

// Builds an op result. Used by the primitives and available for tests that
// want to register custom ops.
Var make_result(const char* op, Array value, std::vector<Var> parents, BackwardFn backward);

struct Gradients {
  std::vector<Var> values;             // one per wrt, shaped like it
  std::vector<std::size_t> unreachable;  // indices of wrt with no path from output
};

// Reverse pass from a scalar output. With create_graph the returned gradients
// are recorded on the active tape and can be differentiated again.
// Unreachable wrt entries get a zero array and are listed in `unreachable`.
Gradients grad(const Var& output, const std::vector<Var>& wrt, bool create_graph);
Var grad(const Var& output, const Var& wrt, bool create_graph);

// Count of unreachable-wrt warnings raised on this thread.
std::size_t unreachable_warning_count();

// Max over coordinates of |analytic - central FD| / max(1, |central FD|).
double finite_diff_check(const std::function<double(const Array&)>& f, const Array& x,
                         const Array& analytic_grad, double h);
// Same, computing the analytic gradient by recording `f` on a fresh tape.
double finite_diff_check(const std::function<Var(const Var&)>& f, const Array& x, double h);

// ---- primitives ------------------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// c * a + d
Var affine(const Var& a, double c, double d = 0.0);
Var mul_const(const Var& a, const Array& m);
Var sum(const Var& a);
// Broadcast a single-element Var to `shape`.
Var expand(const Var& s, const Shape& shape);
Var reshape(const Var& a, const Shape& shape);
// sum_i mask_i * a_i^2; an empty mask means all ones.
Var masked_sq_norm(const Var& a, const Array& mask);
Var sum_squares(const Var& a);

// 2-D matrix product op(a) * op(b).
Var matmul(const Var& a, const Var& b, bool transpose_a = false, bool transpose_b = false);

// Cross-correlation over the last axis, stride 1, zero padding K/2 (K odd).
// x: (B, Cin, T), w: (Cout, Cin, K) -> (B, Cout, T).
Var conv1d(const Var& x, const Var& w);
// Adjoint of conv1d in its input: u (B, Cout, T), w (Cout, Cin, K) -> (B, Cin, T).
Var conv1d_transpose(const Var& u, const Var& w);
// Adjoint of conv1d in its weight: x (B, Cin, T), u (B, Cout, T) -> (Cout, Cin, K).
Var conv1d_weight_grad(const Var& x, const Var& u, std::size_t kernel_size);

// b: (C) broadcast along axis 1 of `shape` (rank 2 or 3).
Var broadcast_channels(const Var& b, const Shape& shape);
// Sums every axis except axis 1.
Var sum_channels(const Var& a);

Var leaky_relu(const Var& a, double slope);
Var leaky_relu_backward(const Var& g, const Var& a, double slope);
Var sigmoid(const Var& a);
Var sigmoid_backward(const Var& g, const Var& s);
Var tanh(const Var& a);
Var tanh_backward(const Var& g, const Var& t);

// Channel (axis 1) slicing and assembly.
Var slice_channels(const Var& a, std::size_t begin, std::size_t end);
Var embed_channels(const Var& a, std::size_t channels, std::size_t begin);
Var concat_channels(const std::vector<Var>& parts);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

}  // namespace varwind::ad
