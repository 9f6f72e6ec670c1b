#include "varwind/assim.hpp"

#include <cmath>
#include <optional>

#include "varwind/errors.hpp"

namespace varwind::assim {

void AssimConfig::validate() const {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0)) throw InvalidArgument("cost weights lambda1, lambda2 must be > 0");
  if (n_iter < 1) throw InvalidArgument("n_iter must be >= 1");
}

namespace {

void require_window(const ad::Shape& s, const char* what) {
  if (s.size() != 3 || s[1] < 2) {
    throw ShapeError(std::string(what) + " must be (B, C>=2, T), got " + ad::to_string(s));
  }
}

// Per-channel 1/std of g over batch and time, broadcast to g's shape.
Array channel_scale(const Array& g) {
  const std::size_t B = g.dim(0), C = g.dim(1), T = g.dim(2);
  std::vector<double> scale(g.size());
  for (std::size_t c = 0; c < C; ++c) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < T; ++t) mean += g[(b * C + c) * T + t];
    mean /= static_cast<double>(B * T);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < T; ++t) {
        const double d = g[(b * C + c) * T + t] - mean;
        sq += d * d;
      }
    const double inv = 1.0 / (std::sqrt(sq / static_cast<double>(B * T)) + 1e-8);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < T; ++t) scale[(b * C + c) * T + t] = inv;
  }
  return Array(g.shape(), std::move(scale));
}

}  // namespace

ObsWindow observe(const Array& x, const Array& available) {
  require_window(x.shape(), "state");
  if (available.size() != 0 && available.shape() != x.shape()) {
    throw ShapeError("availability mask " + ad::to_string(available.shape()) + " does not match state " +
                     ad::to_string(x.shape()));
  }
  const std::size_t B = x.dim(0), C = x.dim(1), T = x.dim(2);
  std::vector<double> y(x.size(), 0.0), mask(x.size(), 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c + 1 < C; ++c)
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t i = (b * C + c) * T + t;
        if (available.size() != 0 && available[i] == 0.0) continue;
        mask[i] = 1.0;
        y[i] = x[i];
      }
  return {Array(x.shape(), std::move(y)), Array(x.shape(), std::move(mask))};
}

Var variational_cost(const Var& x, const ObsWindow& obs, const priors::ConvAE& phi, const AssimConfig& cfg) {
  if (x.shape() != obs.y.shape() || obs.mask.shape() != obs.y.shape()) {
    throw ShapeError("variational cost: state " + ad::to_string(x.shape()) + " vs observations " +
                     ad::to_string(obs.y.shape()));
  }
  Var data = ad::masked_sq_norm(x - ad::constant(obs.y), obs.mask);
  Var prior = ad::sum_squares(x - phi(x));
  return ad::affine(data, cfg.lambda1) + ad::affine(prior, cfg.lambda2);
}

Array initial_state(const ObsWindow& obs) {
  std::vector<double> v = obs.y.to_vector();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= obs.mask[i];
  return Array(obs.y.shape(), std::move(v));
}

void Solver::init(nn::ParamSet& params, std::size_t channels, std::mt19937_64& rng, std::size_t hidden) {
  priors::ConvAE::init(params, "phi", channels, rng);
  nn::ConvLstmCell::init(params, "gamma", channels, hidden, rng);
  nn::init_conv1d(params, "head", hidden, channels, 1, rng);
}

Solver Solver::bind(const nn::BoundParams& params) {
  Solver s{priors::ConvAE::bind(params, "phi"), nn::ConvLstmCell::bind(params, "gamma"),
           nn::Conv1dLayer::bind(params, "head")};
  if (s.gamma.input_channels() != s.channels() || s.head.out_channels() != s.channels() ||
      s.head.in_channels() != s.gamma.hidden) {
    throw ShapeError("solver parameters have inconsistent channel counts");
  }
  return s;
}

SolverState solver_step(const SolverState& state, const ObsWindow& obs, const Solver& solver,
                        const AssimConfig& cfg) {
  std::optional<ad::Tape> local;
  if (ad::Tape::active() == nullptr) local.emplace();
  if (!ad::recording_enabled()) throw InvalidArgument("solver_step needs gradient recording enabled");

  Var x = state.x.requires_grad() ? state.x : ad::Tape::active()->variable(state.x.value());
  Var cost = variational_cost(x, obs, solver.phi, cfg);
  Var g = ad::grad(cost, x, !cfg.detach_inner_grad);
  if (!g.value().all_finite()) throw NumericalError("non-finite cost gradient in solver step");
  if (cfg.normalize_grad) g = ad::mul_const(g, channel_scale(g.value()));

  nn::LstmState lstm = solver.gamma.step(g, state.lstm);
  Var update = solver.head(lstm.h);
  Var next = cfg.update_mode == UpdateMode::additive ? state.x + update : update;
  if (local) return {ad::detach(next), {ad::detach(lstm.h), ad::detach(lstm.c)}};
  return {next, lstm};
}

Var reconstruct(const ObsWindow& obs, const Solver& solver, const AssimConfig& cfg) {
  cfg.validate();
  require_window(obs.y.shape(), "observations");
  if (obs.y.dim(1) != solver.channels()) {
    throw ShapeError("observations have " + std::to_string(obs.y.dim(1)) + " channels, solver expects " +
                     std::to_string(solver.channels()));
  }
  std::optional<ad::Tape> local;
  if (ad::Tape::active() == nullptr) local.emplace();
  SolverState s{ad::constant(initial_state(obs)), solver.gamma.zero_state(obs.y.dim(0), obs.y.dim(2))};
  for (std::size_t k = 0; k < cfg.n_iter; ++k) s = solver_step(s, obs, solver, cfg);
  return local ? ad::detach(s.x) : s.x;
}

Var direct_inversion(const ObsWindow& obs, const priors::ConvAE& phi) {
  require_window(obs.y.shape(), "observations");
  return phi(ad::constant(initial_state(obs)));
}

}  // namespace varwind::assim
