#include "varwind/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "varwind/errors.hpp"
#include "varwind/priors.hpp"

namespace varwind::train {

namespace {

constexpr std::pair<ModelKind, std::string_view> kModelNames[] = {
    {ModelKind::fcae_ti, "fcae-ti"},
    {ModelKind::fcae_td, "fcae-td"},
    {ModelKind::convae_upa, "convae-upa"},
    {ModelKind::convae_upa_ecmwf, "convae-upa-ecmwf"},
    {ModelKind::varnet_upa, "varnet-upa"},
    {ModelKind::varnet_upa_ecmwf, "varnet-upa-ecmwf"},
};

// Channels [begin, end) of a (N, C, T) array.
Array slice(const Array& a, std::size_t begin, std::size_t end) {
  const std::size_t N = a.dim(0), C = a.dim(1), T = a.dim(2), K = end - begin;
  std::vector<double> out(N * K * T);
  for (std::size_t n = 0; n < N; ++n)
    std::copy_n(a.data() + (n * C + begin) * T, K * T, out.data() + n * K * T);
  return Array({N, K, T}, std::move(out));
}

double total(const Array& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return s;
}

std::size_t sample_len(ModelKind kind) { return kind == ModelKind::fcae_ti ? 1 : data::kWindowLen; }

// The per-hour model sees the same number of hours per step as the window models.
std::size_t samples_per_window(ModelKind kind) { return kind == ModelKind::fcae_ti ? data::kWindowLen : 1; }

enum class Group { prior, solver, fcae };

Group group_of(const std::string& path) {
  if (path.starts_with("phi.")) return Group::prior;
  if (path.starts_with("fc.")) return Group::fcae;
  return Group::solver;
}

struct Batches {
  std::vector<data::WindowBatch> batches;
};

Batches fixed_batches(const Dataset& ds, data::Modality modality, const std::vector<std::size_t>& starts,
                      std::size_t batch_size, double missing_frac, std::uint64_t mask_seed) {
  Batches out;
  for (std::size_t i = 0, k = 0; i < starts.size(); i += batch_size, ++k) {
    const std::size_t n = std::min(batch_size, starts.size() - i);
    data::WindowBatch wb =
        data::gather_windows(ds.table, ds.normalizer, modality, std::span(starts).subspan(i, n));
    data::apply_missing_mask(wb, missing_frac, mix_seed({mask_seed, k}));
    out.batches.push_back(std::move(wb));
  }
  return out;
}

double wind_sq_error(const Forward& f, double* count) {
  const std::size_t N = f.target.dim(0), C = f.target.dim(1), T = f.target.dim(2);
  const Array& x = f.xhat.value();
  double s = 0.0;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t i = (n * C + C - 1) * T + t;
      const double d = x[i] - f.target[i];
      s += f.avail[i] * d * d;
      *count += f.avail[i];
    }
  return s;
}

double evaluate_loss(ModelKind kind, const nn::ParamSet& params, const Batches& batches, std::size_t n_iter,
                     const TrainConfig& cfg) {
  assim::AssimConfig inference = cfg.assim;
  inference.n_iter = std::max<std::size_t>(n_iter, 1);
  inference.detach_inner_grad = true;
  double sum = 0.0, count = 0.0;
  for (const data::WindowBatch& wb : batches.batches) {
    ad::Tape tape;
    nn::BoundParams bound(params, nullptr);
    const Forward f = forward(kind, bound, wb, inference.n_iter, inference);
    if (cfg.val_metric == ValMetric::wind_rmse) {
      sum += wind_sq_error(f, &count);
    } else {
      const double n = static_cast<double>(wb.x.dim(0));
      sum += batch_loss(f, cfg.loss).value().item() * n;
      count += n;
    }
  }
  if (count <= 0.0) throw MaskError("validation windows hold no supervised entries");
  return cfg.val_metric == ValMetric::wind_rmse ? std::sqrt(sum / count) : sum / count;
}

}  // namespace

std::string_view model_name(ModelKind kind) {
  for (const auto& [k, name] : kModelNames)
    if (k == kind) return name;
  throw InternalError("unknown model kind");
}

ModelKind parse_model(std::string_view name) {
  for (const auto& [k, n] : kModelNames)
    if (n == name) return k;
  std::string valid;
  for (const auto& [k, n] : kModelNames) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw InvalidArgument("unknown model '" + std::string(name) + "' (expected one of " + valid + ")");
}

data::Modality model_modality(ModelKind kind) {
  return kind == ModelKind::convae_upa_ecmwf || kind == ModelKind::varnet_upa_ecmwf ? data::Modality::upa_ecmwf
                                                                                     : data::Modality::upa;
}

bool is_varnet(ModelKind kind) { return kind == ModelKind::varnet_upa || kind == ModelKind::varnet_upa_ecmwf; }

bool is_fcae(ModelKind kind) { return kind == ModelKind::fcae_ti || kind == ModelKind::fcae_td; }

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  // splitmix64 folded over the parts
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (std::uint64_t p : parts) {
    h ^= p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    std::uint64_t z = h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    h = z ^ (z >> 31);
  }
  return h;
}

Var training_loss(const Var& xhat, const Array& y_obs, const Array& wind, const Array& mask_obs,
                  const Array& mask_wind, const LossWeights& weights) {
  const ad::Shape& s = xhat.shape();
  if (s.size() != 3 || s[1] < 2) throw ShapeError("training loss expects (N, C>=2, T), got " + ad::to_string(s));
  const ad::Shape obs_shape{s[0], s[1] - 1, s[2]}, wind_shape{s[0], 1, s[2]};
  if (y_obs.shape() != obs_shape || mask_obs.shape() != obs_shape || wind.shape() != wind_shape ||
      mask_wind.shape() != wind_shape) {
    throw ShapeError("training loss targets do not match prediction " + ad::to_string(s));
  }
  const double n_obs = total(mask_obs), n_wind = total(mask_wind);
  if (n_obs <= 0.0) throw MaskError("observation mask is empty");
  if (n_wind <= 0.0) throw MaskError("wind mask is empty");
  Var obs = ad::slice_channels(xhat, 0, s[1] - 1);
  Var w = ad::slice_channels(xhat, s[1] - 1, s[1]);
  Var data_term = ad::masked_sq_norm(obs - ad::constant(y_obs), mask_obs);
  Var wind_term = ad::masked_sq_norm(w - ad::constant(wind), mask_wind);
  return ad::affine(data_term, weights.data / n_obs) + ad::affine(wind_term, weights.wind / n_wind);
}

void TrainConfig::validate() const {
  if (epochs < 1 || baseline_epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (train_windows < 1) throw InvalidArgument("train_windows must be >= 1");
  if (validation_stride < 1) throw InvalidArgument("validation stride must be >= 1");
  if (seeds.empty()) throw InvalidArgument("at least one seed is required");
  if (phase1_iters < 1 || phase2_iters < phase1_iters) {
    throw InvalidArgument("solver iterations must satisfy 1 <= phase1_iters <= phase2_iters");
  }
  if (!(loss.data >= 0.0) || !(loss.wind >= 0.0)) throw InvalidArgument("loss weights must be >= 0");
  if (!(missing_frac >= 0.0 && missing_frac <= 0.9)) throw InvalidArgument("missing_frac must lie in [0, 0.9]");
  for (const nn::AdamConfig* a : {&adam_prior, &adam_solver, &adam_fcae}) {
    if (!(a->learning_rate > 0.0) || a->weight_decay < 0.0 || !(a->beta1 >= 0.0 && a->beta1 < 1.0) ||
        !(a->beta2 >= 0.0 && a->beta2 < 1.0) || !(a->epsilon > 0.0)) {
      throw InvalidArgument("invalid Adam settings");
    }
  }
  assim::AssimConfig a = assim;
  a.n_iter = std::max<std::size_t>(a.n_iter, 1);
  a.validate();
}

Dataset Dataset::prepare(data::Table table, const TrainConfig& cfg) {
  Dataset ds;
  ds.table = std::move(table);
  ds.splits = data::split_rows(ds.table, cfg.test_hours, cfg.validation_hours);
  if (ds.splits.train.size() == 0) throw InvalidArgument("dataset has no training rows after the test/validation split");
  ds.normalizer = data::Normalizer::fit(ds.table, ds.splits.train);
  ds.validation_starts = data::make_windows(ds.table, ds.splits.validation, data::kWindowLen, cfg.validation_stride);
  if (ds.validation_starts.empty()) throw InvalidArgument("validation region holds no complete window");
  return ds;
}

nn::ParamSet init_params(ModelKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed({seed, 0x696e6974}));
  const std::size_t channels = data::state_channels(model_modality(kind)).size();
  nn::ParamSet p;
  if (is_fcae(kind)) {
    priors::FcAE::init(p, "fc", channels, rng);
  } else if (is_varnet(kind)) {
    assim::Solver::init(p, channels, rng);
  } else {
    priors::ConvAE::init(p, "phi", channels, rng);
  }
  return p;
}

Forward forward(ModelKind kind, const nn::BoundParams& params, const data::WindowBatch& batch, std::size_t n_iter,
                const assim::AssimConfig& cfg) {
  const assim::ObsWindow obs = assim::observe(batch.x, batch.avail);
  Forward f;
  if (is_fcae(kind)) {
    const std::size_t N = batch.x.dim(0) * batch.x.dim(2), C = batch.x.dim(1);
    auto fc = priors::FcAE::bind(params, "fc");
    Var out = fc(ad::constant(data::windows_to_rows(assim::initial_state(obs))));
    f.xhat = ad::reshape(out, {N, C, 1});
    f.target = Array({N, C, 1}, data::windows_to_rows(batch.x).to_vector());
    f.avail = Array({N, C, 1}, data::windows_to_rows(batch.avail).to_vector());
    return f;
  }
  if (is_varnet(kind)) {
    assim::AssimConfig c = cfg;
    c.n_iter = n_iter;
    f.xhat = assim::reconstruct(obs, assim::Solver::bind(params), c);
  } else {
    f.xhat = assim::direct_inversion(obs, priors::ConvAE::bind(params, "phi"));
  }
  f.target = batch.x;
  f.avail = batch.avail;
  return f;
}

Var batch_loss(const Forward& f, const LossWeights& weights) {
  const std::size_t C = f.target.dim(1);
  return training_loss(f.xhat, slice(f.target, 0, C - 1), slice(f.target, C - 1, C), slice(f.avail, 0, C - 1),
                       slice(f.avail, C - 1, C), weights);
}

Array predict_wind(ModelKind kind, const nn::ParamSet& params, const data::WindowBatch& batch, std::size_t n_iter,
                   const assim::AssimConfig& cfg) {
  assim::AssimConfig inference = cfg;
  inference.detach_inner_grad = true;
  ad::Tape tape;
  nn::BoundParams bound(params, nullptr);
  const Forward f = forward(kind, bound, batch, std::max<std::size_t>(n_iter, 1), inference);
  const std::size_t B = batch.x.dim(0), C = batch.x.dim(1), T = batch.x.dim(2);
  const Array& out = f.xhat.value();
  std::vector<double> wind(B * T);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      wind[b * T + t] = is_fcae(kind) ? out[(b * T + t) * C + (C - 1)] : out[(b * C + (C - 1)) * T + t];
    }
  return Array({B, T}, std::move(wind));
}

PhaseResult train_phase(ModelKind kind, const Dataset& ds, const std::vector<std::size_t>& train_starts,
                        nn::ParamSet params, std::size_t n_iter, std::size_t epochs, std::size_t phase,
                        std::uint64_t seed, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (train_starts.empty()) throw InvalidArgument("no training samples");
  const data::Modality modality = model_modality(kind);
  const std::size_t len = sample_len(kind);
  const std::size_t batch_size = cfg.batch_size * samples_per_window(kind);
  const Batches validation = fixed_batches(ds, modality, ds.validation_starts, cfg.batch_size, cfg.missing_frac,
                                           mix_seed({cfg.mask_seed, 0x76616c}));

  nn::AdamState prior, solver, fcae;
  prior.config = cfg.adam_prior;
  solver.config = cfg.adam_solver;
  fcae.config = cfg.adam_fcae;
  PhaseResult result;
  result.phase = phase;
  result.n_iter = n_iter;
  std::vector<std::size_t> order(train_starts.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 shuffle_rng(mix_seed({seed, phase, epoch, 0x73687566}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t i = 0, k = 0; i < order.size(); i += batch_size, ++k) {
      const std::size_t n = std::min(batch_size, order.size() - i);
      std::vector<std::size_t> starts(n);
      for (std::size_t j = 0; j < n; ++j) starts[j] = train_starts[order[i + j]];
      data::WindowBatch wb = data::gather_windows(ds.table, ds.normalizer, modality, starts, len);
      data::apply_missing_mask(wb, cfg.missing_frac, mix_seed({cfg.mask_seed, seed, phase, epoch, k}));

      double loss_value = 0.0;
      std::map<std::string, Array> grads[3];
      try {
        ad::Tape tape;
        nn::BoundParams bound(params, &tape);
        Var loss = batch_loss(forward(kind, bound, wb, n_iter, cfg.assim), cfg.loss);
        loss_value = loss.value().item();
        std::vector<std::string> names;
        std::vector<Var> wrt;
        for (const auto& [name, v] : bound.vars()) {
          names.push_back(name);
          wrt.push_back(v);
        }
        ad::Gradients g = ad::grad(loss, wrt, false);
        for (std::size_t j = 0; j < names.size(); ++j) {
          grads[static_cast<int>(group_of(names[j]))].emplace(names[j], g.values[j].value());
        }
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged (" + std::string(model_name(kind)) + ", seed " +
                             std::to_string(seed) + ", phase " + std::to_string(phase) + ", epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(k) + "): " + e.what());
      }
      if (!std::isfinite(loss_value)) {
        throw NumericalError("training loss is not finite (" + std::string(model_name(kind)) + ", seed " +
                             std::to_string(seed) + ", epoch " + std::to_string(epoch) + ")");
      }
      if (!grads[0].empty()) nn::adam_step(params, grads[0], prior);
      if (!grads[1].empty()) nn::adam_step(params, grads[1], solver);
      if (!grads[2].empty()) nn::adam_step(params, grads[2], fcae);
      loss_sum += loss_value * static_cast<double>(n);
      loss_count += n;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(loss_count);
    rec.val_loss = evaluate_loss(kind, params, validation, n_iter, cfg);
    if (!std::isfinite(rec.val_loss)) {
      throw NumericalError("validation loss is not finite at epoch " + std::to_string(epoch));
    }
    rec.selected = result.curve.empty() || rec.val_loss < result.best_val_loss;
    if (rec.selected) {
      result.best_epoch = epoch;
      result.best_val_loss = rec.val_loss;
      result.best_params = params;
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.curve.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

std::size_t final_iters(ModelKind kind, const TrainConfig& cfg) { return is_varnet(kind) ? cfg.phase2_iters : 1; }

SeedResult train_seed(ModelKind kind, const Dataset& ds, std::uint64_t seed, const TrainConfig& cfg,
                      const std::function<void(std::size_t, const EpochRecord&)>& on_epoch) {
  cfg.validate();
  const std::size_t len = sample_len(kind);
  const std::vector<std::size_t> starts = data::sample_train_windows(
      ds.table, ds.splits.train, cfg.train_windows * samples_per_window(kind), mix_seed({seed, 0x77696e}), len);
  SeedResult r;
  r.seed = seed;
  auto callback = [&](std::size_t phase) {
    return [&on_epoch, phase](const EpochRecord& e) {
      if (on_epoch) on_epoch(phase, e);
    };
  };
  nn::ParamSet params = init_params(kind, seed);
  if (is_varnet(kind)) {
    r.phases.push_back(train_phase(kind, ds, starts, std::move(params), cfg.phase1_iters, cfg.epochs, 1, seed, cfg,
                                   callback(1)));
    r.phases.push_back(train_phase(kind, ds, starts, r.phases[0].best_params, cfg.phase2_iters, cfg.epochs, 2, seed,
                                   cfg, callback(2)));
  } else {
    r.phases.push_back(
        train_phase(kind, ds, starts, std::move(params), 1, cfg.baseline_epochs, 1, seed, cfg, callback(1)));
  }
  return r;
}

std::vector<SeedResult> train_seeds(ModelKind kind, const Dataset& ds, const std::vector<std::uint64_t>& seeds,
                                    const TrainConfig& cfg,
                                    const std::function<void(std::uint64_t, std::size_t, const EpochRecord&)>& on_epoch) {
  cfg.validate();
  std::vector<SeedResult> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        results[i] = train_seed(kind, ds, seeds[i], cfg, [&, i](std::size_t phase, const EpochRecord& e) {
          if (on_epoch) on_epoch(seeds[i], phase, e);
        });
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t n_threads = cfg.threads != 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, seeds.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace varwind::train
