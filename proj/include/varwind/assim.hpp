#pragma once

// Variational reconstruction of a multichannel window. The state x has shape
// (B, C, T); channels 0..C-2 are observable, the last channel is the wind,
// which is never observed directly.

#include <random>

#include "varwind/nn.hpp"
#include "varwind/priors.hpp"

namespace varwind::assim {

using ad::Array;
using ad::Var;

inline constexpr std::size_t kLstmHidden = 100;

enum class UpdateMode { replace, additive };

struct AssimConfig {
  double lambda1 = 0.5;  // observation term
  double lambda2 = 1.5;  // prior term
  std::size_t n_iter = 5;
  bool detach_inner_grad = false;
  UpdateMode update_mode = UpdateMode::replace;
  // Scale each channel of the cost gradient by 1/std (computed without recording).
  bool normalize_grad = false;

  void validate() const;
};

struct ObsWindow {
  Array y;     // observed values, 0 where unobserved
  Array mask;  // 1 where observed
};

// y = mask * x with the wind channel removed from the mask. `available` (same
// shape as x, 1 = present) is intersected with the mask; empty means all present.
ObsWindow observe(const Array& x, const Array& available = {});

// lambda1 * sum_{mask} (x - y)^2 + lambda2 * sum (x - phi(x))^2
Var variational_cost(const Var& x, const ObsWindow& obs, const priors::ConvAE& phi, const AssimConfig& cfg);

// Observed values on observable channels, zero elsewhere.
Array initial_state(const ObsWindow& obs);

// Trainable parameters of the reconstruction map: prior "phi", recurrent
// gradient solver "gamma", and the 1x1 head "head" mapping the LSTM state back
// to the state channels.
struct Solver {
  priors::ConvAE phi;
  nn::ConvLstmCell gamma;
  nn::Conv1dLayer head;

  static void init(nn::ParamSet& params, std::size_t channels, std::mt19937_64& rng,
                   std::size_t hidden = kLstmHidden);
  static Solver bind(const nn::BoundParams& params);
  std::size_t channels() const { return phi.channels(); }
};

struct SolverState {
  Var x;
  nn::LstmState lstm;
};

// One iteration: g = d cost / dx, (h, c) = LSTM(g, h, c), x = head(h)
// (or x + head(h) in additive mode). Records on the active tape, or on a
// private tape when none is active.
SolverState solver_step(const SolverState& state, const ObsWindow& obs, const Solver& solver,
                        const AssimConfig& cfg);

// n_iter solver steps from the initial state with zero LSTM state.
Var reconstruct(const ObsWindow& obs, const Solver& solver, const AssimConfig& cfg);

// Single pass of the prior on the initial state (auto-encoder baseline).
Var direct_inversion(const ObsWindow& obs, const priors::ConvAE& phi);

}  // namespace varwind::assim
