#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "varwind/assim.hpp"
#include "varwind/data.hpp"
#include "varwind/nn.hpp"

namespace varwind::train {

using ad::Array;
using ad::Var;

enum class ModelKind { fcae_ti, fcae_td, convae_upa, convae_upa_ecmwf, varnet_upa, varnet_upa_ecmwf };

std::string_view model_name(ModelKind kind);
ModelKind parse_model(std::string_view name);  // InvalidArgument on unknown names
data::Modality model_modality(ModelKind kind);
bool is_varnet(ModelKind kind);
bool is_fcae(ModelKind kind);

struct LossWeights {
  double data = 0.5;  // observable channels
  double wind = 1.5;  // in-situ wind
};

// weights.data * masked mean of (y_obs - xhat_obs)^2 over mask_obs
//   + weights.wind * masked mean of (wind - xhat_wind)^2 over mask_wind.
// xhat is (N, C, T); y_obs/mask_obs are (N, C-1, T); wind/mask_wind are (N, 1, T).
// An all-zero mask raises MaskError.
Var training_loss(const Var& xhat, const Array& y_obs, const Array& wind, const Array& mask_obs,
                  const Array& mask_wind, const LossWeights& weights);

// Model selection criterion: the training loss on validation windows, or the
// wind RMSE there (normalized units).
enum class ValMetric { loss, wind_rmse };

struct TrainConfig {
  std::size_t epochs = 200;           // per phase of the learned solver
  std::size_t baseline_epochs = 200;  // single phase of the baselines
  std::size_t batch_size = 32;
  std::size_t train_windows = 2000;
  std::size_t validation_stride = 24;
  std::size_t test_hours = data::kSplitHours;
  std::size_t validation_hours = data::kSplitHours;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::size_t phase1_iters = 5;
  std::size_t phase2_iters = 10;
  LossWeights loss;
  ValMetric val_metric = ValMetric::loss;
  assim::AssimConfig assim;
  nn::AdamConfig adam_prior{1e-3, 1e-5};
  nn::AdamConfig adam_solver{1e-3, 1e-5};
  nn::AdamConfig adam_fcae{1e-3, 1e-6};
  double missing_frac = 0.0;
  std::uint64_t mask_seed = 2024;
  std::size_t threads = 0;  // 0 = one per hardware thread

  void validate() const;
};

// Cleaned data with its split, normalizer and fixed evaluation windows.
struct Dataset {
  data::Table table;
  data::Splits splits;
  data::Normalizer normalizer;
  std::vector<std::size_t> validation_starts;

  static Dataset prepare(data::Table table, const TrainConfig& cfg);
};

nn::ParamSet init_params(ModelKind kind, std::uint64_t seed);

// Model output for one batch, with targets laid out like the output. The
// fully connected models work per time step, so their output and targets
// are (B*T, C, 1).
struct Forward {
  Var xhat;
  Array target;  // normalized state, 0 where absent
  Array avail;
};

// Missing-data masking is expected to be applied to `batch` already.
Forward forward(ModelKind kind, const nn::BoundParams& params, const data::WindowBatch& batch, std::size_t n_iter,
                const assim::AssimConfig& cfg);
Var batch_loss(const Forward& f, const LossWeights& weights);

// Normalized wind predictions (B, T) without recording a graph.
Array predict_wind(ModelKind kind, const nn::ParamSet& params, const data::WindowBatch& batch, std::size_t n_iter,
                   const assim::AssimConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;
  bool selected = false;  // new best validation loss
};

struct PhaseResult {
  std::size_t phase = 1;
  std::size_t n_iter = 0;
  std::vector<EpochRecord> curve;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  nn::ParamSet best_params;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Adam over `epochs` passes of the sampled training windows; keeps the
// parameters with the lowest validation loss.
PhaseResult train_phase(ModelKind kind, const Dataset& ds, const std::vector<std::size_t>& train_starts,
                        nn::ParamSet params, std::size_t n_iter, std::size_t epochs, std::size_t phase,
                        std::uint64_t seed, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<PhaseResult> phases;
  const PhaseResult& final_phase() const { return phases.back(); }
};

// Learned solver: phase 1 with phase1_iters, then phase 2 with phase2_iters
// from the phase-1 selection and fresh optimizers. Baselines: one phase.
SeedResult train_seed(ModelKind kind, const Dataset& ds, std::uint64_t seed, const TrainConfig& cfg,
                      const std::function<void(std::size_t phase, const EpochRecord&)>& on_epoch = {});

// Runs `seeds` concurrently on up to cfg.threads workers; results keep the seed order.
std::vector<SeedResult> train_seeds(ModelKind kind, const Dataset& ds, const std::vector<std::uint64_t>& seeds,
                                    const TrainConfig& cfg,
                                    const std::function<void(std::uint64_t seed, std::size_t phase,
                                                             const EpochRecord&)>& on_epoch = {});

// Solver iterations used at inference by the final model of `kind`.
std::size_t final_iters(ModelKind kind, const TrainConfig& cfg);

// Deterministic seed mixing for independent random streams.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

}  // namespace varwind::train
