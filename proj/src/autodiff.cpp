#include "varwind/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <optional>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "varwind/errors.hpp"
#include "varwind/kernels.hpp"

namespace varwind::ad {
namespace {

std::atomic<std::uint64_t> g_next_tape_id{1};
std::atomic<std::uint64_t> g_next_seq{1};

thread_local Tape* t_active_tape = nullptr;
thread_local bool t_grad_enabled = true;
thread_local std::size_t t_unreachable_warnings = 0;

const auto kEmptyValues = std::make_shared<const std::vector<double>>();

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

// ---- Array -----------------------------------------------------------------

Array::Array() : shape_{0}, values_(kEmptyValues) {}

Array::Array(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)),
      values_(std::make_shared<const std::vector<double>>(std::move(values))) {
  if (numel(shape_) != values_->size()) {
    throw ShapeError("Array: shape " + to_string(shape_) + " holds " + std::to_string(numel(shape_)) +
                     " values, got " + std::to_string(values_->size()));
  }
}

Array Array::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Array Array::filled(Shape shape, double value) {
  const std::size_t n = numel(shape);
  return Array(std::move(shape), std::vector<double>(n, value));
}

Array Array::scalar(double value) { return Array(Shape{}, std::vector<double>{value}); }

double Array::item() const {
  if (size() != 1) throw ShapeError("Array::item on shape " + to_string(shape_));
  return (*values_)[0];
}

bool Array::all_finite() const {
  for (double v : *values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool bitwise_equal(const Array& a, const Array& b) {
  if (a.shape() != b.shape()) return false;
  return std::equal(a.values().begin(), a.values().end(), b.values().begin(), [](double x, double y) {
    return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
  });
}

// ---- Var / Tape --------------------------------------------------------------

const Array& Var::value() const {
  if (!node_) throw InternalError("Var::value on an undefined Var");
  return node_->value;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }
const char* Var::op() const { return node_ ? node_->op : "undefined"; }
std::uint64_t Var::tape_id() const { return node_ ? node_->tape_id : 0; }

Tape::Tape(TapeOptions options)
    : id_(g_next_tape_id.fetch_add(1)), options_(options), previous_(t_active_tape) {
  t_active_tape = this;
}

Tape::~Tape() { t_active_tape = previous_; }

Tape* Tape::active() { return t_active_tape; }

Var Tape::variable(Array value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = "variable";
  node->tape_id = id_;
  node->seq = g_next_seq.fetch_add(1);
  node->requires_grad = true;
  return Var(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool recording_enabled() { return t_grad_enabled && t_active_tape != nullptr; }

Var constant(Array value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = "constant";
  node->seq = g_next_seq.fetch_add(1);
  return Var(std::move(node));
}

Var constant_scalar(double value) { return constant(Array::scalar(value)); }

Var detach(const Var& v) { return constant(v.value()); }

Var make_result(const char* op, Array value, std::vector<Var> parents, BackwardFn backward) {
  const Tape* tape = t_active_tape;
  if ((tape == nullptr || tape->options().check_finite) && !value.all_finite()) {
    throw NumericalError(std::string("non-finite value produced by '") + op + "'");
  }
  bool tracked = false;
  if (t_grad_enabled && tape != nullptr) {
    for (const Var& p : parents) {
      if (!p.requires_grad()) continue;
      if (p.tape_id() != tape->id()) {
        throw InternalError(std::string("'") + op + "' mixes nodes from different recording contexts");
      }
      tracked = true;
    }
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  node->seq = g_next_seq.fetch_add(1);
  if (tracked) {
    node->tape_id = tape->id();
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

// ---- reverse pass ------------------------------------------------------------

Gradients grad(const Var& output, const std::vector<Var>& wrt, bool create_graph) {
  if (!output.defined() || output.value().size() != 1) {
    throw ShapeError("grad: output must be a single-element value");
  }
  Gradients result;
  result.values.resize(wrt.size());

  std::unordered_set<const Node*> seen;
  std::vector<std::shared_ptr<Node>> nodes;
  if (output.requires_grad()) {
    std::vector<Node*> stack{output.node().get()};
    seen.insert(output.node().get());
    nodes.push_back(output.node());
    while (!stack.empty()) {
      Node* n = stack.back();
      stack.pop_back();
      for (const Var& p : n->parents) {
        const std::shared_ptr<Node>& pn = p.node();
        if (!pn->requires_grad) continue;
        if (pn->seq >= n->seq) throw InternalError("grad: recorded graph is not acyclic");
        if (seen.insert(pn.get()).second) {
          nodes.push_back(pn);
          stack.push_back(pn.get());
        }
      }
    }
  }
  std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a->seq < b->seq; });

  std::unordered_set<const Node*> targets;
  for (const Var& w : wrt) {
    if (w.defined()) targets.insert(w.node().get());
  }
  // A node matters when it is a target or depends on one.
  std::unordered_set<const Node*> relevant;
  for (const auto& node : nodes) {
    const Node* n = node.get();
    bool r = targets.count(n) > 0;
    for (std::size_t i = 0; !r && i < n->parents.size(); ++i) r = relevant.count(n->parents[i].node().get()) > 0;
    if (r) relevant.insert(n);
  }

  std::unordered_map<const Node*, Var> grads;
  {
    std::optional<NoGradGuard> no_grad;
    if (!create_graph) no_grad.emplace();
    if (!nodes.empty() && relevant.count(output.node().get())) {
      grads.emplace(output.node().get(), constant(Array::filled(output.shape(), 1.0)));
    }
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
      Node* n = it->get();
      auto g = grads.find(n);
      if (g == grads.end() || !n->backward) continue;
      std::vector<bool> needs(n->parents.size());
      bool any = false;
      for (std::size_t i = 0; i < n->parents.size(); ++i) {
        needs[i] = n->parents[i].requires_grad() && relevant.count(n->parents[i].node().get()) > 0;
        any = any || needs[i];
      }
      if (!any) continue;
      const Var grad_out = g->second;
      if (!targets.count(n)) grads.erase(g);
      std::vector<Var> parent_grads = n->backward(Var(*it), grad_out, needs);
      for (std::size_t i = 0; i < n->parents.size(); ++i) {
        if (!needs[i] || !parent_grads[i].defined()) continue;
        const Node* pn = n->parents[i].node().get();
        auto [slot, inserted] = grads.emplace(pn, parent_grads[i]);
        if (!inserted) slot->second = add(slot->second, parent_grads[i]);
      }
    }
  }

  for (std::size_t i = 0; i < wrt.size(); ++i) {
    const Var& w = wrt[i];
    if (!w.defined()) throw InvalidArgument("grad: undefined wrt variable");
    auto g = grads.find(w.node().get());
    if (g != grads.end()) {
      result.values[i] = g->second;
    } else {
      if (!relevant.count(w.node().get())) {
        result.unreachable.push_back(i);
        ++t_unreachable_warnings;
      }
      result.values[i] = constant(Array::zeros(w.shape()));
    }
  }
  return result;
}

Var grad(const Var& output, const Var& wrt, bool create_graph) {
  return grad(output, std::vector<Var>{wrt}, create_graph).values.front();
}

std::size_t unreachable_warning_count() { return t_unreachable_warnings; }

// ---- finite differences ------------------------------------------------------

double finite_diff_check(const std::function<double(const Array&)>& f, const Array& x,
                         const Array& analytic_grad, double h) {
  if (!(h > 0.0 && h <= 1e-2)) throw InvalidArgument("finite_diff_check: h must lie in (0, 1e-2]");
  if (analytic_grad.shape() != x.shape()) throw ShapeError("finite_diff_check: gradient shape mismatch");
  std::vector<double> probe = x.to_vector();
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double fp = f(Array(x.shape(), probe));
    probe[i] = saved - h;
    const double fm = f(Array(x.shape(), probe));
    probe[i] = saved;
    const double fd = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic_grad[i] - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

double finite_diff_check(const std::function<Var(const Var&)>& f, const Array& x, double h) {
  Array analytic;
  {
    Tape tape;
    Var xv = tape.variable(x);
    analytic = grad(f(xv), xv, false).value();
  }
  auto plain = [&f](const Array& a) {
    NoGradGuard guard;
    return f(constant(a)).value().item();
  };
  return finite_diff_check(plain, x, analytic, h);
}

}  // namespace varwind::ad
