#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "varwind/errors.hpp"
#include "varwind/pipeline.hpp"
#include "varwind/varwind.h"

using namespace varwind;

struct vw_config {
  config::Config cfg;
};

struct vw_run {
  std::string dir;
  std::string hash;
  std::vector<std::string> checkpoints;
};

struct vw_report {
  eval::EvalReport report;
  std::string text;
  std::string out_dir;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
vw_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return VW_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<vw_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return VW_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VW_ERR_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void require(const void* p, const char* what) {
  if (!p) throw InvalidArgument(std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* vw_version(void) { return "1.0.0"; }

const char* vw_status_string(vw_status status) {
  switch (status) {
    case VW_OK: return "ok";
    case VW_ERR_INVALID_ARGUMENT: return "invalid argument";
    case VW_ERR_SHAPE: return "shape mismatch";
    case VW_ERR_NUMERICAL: return "numerical failure";
    case VW_ERR_INGEST: return "ingest error";
    case VW_ERR_MASK: return "mask error";
    case VW_ERR_CALIBRATION: return "calibration error";
    case VW_ERR_CHECKPOINT: return "checkpoint error";
    case VW_ERR_CONFIG: return "configuration error";
    case VW_ERR_IO: return "i/o error";
    case VW_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* vw_last_error(void) { return g_last_error.c_str(); }

void vw_string_free(char* s) { std::free(s); }

vw_status vw_config_default(vw_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new vw_config{};
  });
}

vw_status vw_config_load(const char* path, vw_config** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new vw_config{config::load(path)};
  });
}

vw_status vw_config_set(vw_config* cfg, const char* key, const char* value) {
  return guard([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    config::Config next = cfg->cfg;
    config::set(next, key, value);
    cfg->cfg = next;
  });
}

vw_status vw_config_get(const vw_config* cfg, const char* key, char** value) {
  return guard([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    *value = dup(config::get(cfg->cfg, key));
  });
}

vw_status vw_config_to_ini(const vw_config* cfg, char** text) {
  return guard([&] {
    require(cfg, "cfg");
    require(text, "text");
    *text = dup(config::to_ini(cfg->cfg));
  });
}

vw_status vw_config_hash(const vw_config* cfg, char** hash) {
  return guard([&] {
    require(cfg, "cfg");
    require(hash, "hash");
    *hash = dup(config::hash(cfg->cfg));
  });
}

void vw_config_free(vw_config* cfg) { delete cfg; }

vw_status vw_synth(size_t hours, uint64_t seed, const vw_config* cfg, const char* out_csv, vw_synth_stats* stats) {
  return guard([&] {
    require(out_csv, "out_csv");
    const data::SynthConfig synth = cfg ? cfg->cfg.synth : data::SynthConfig{};
    const data::SynthStats s = pipeline::run_synth(hours, seed, synth, out_csv);
    if (stats) *stats = {s.rmse, s.r2, s.max_wind, s.ecmwf_noise};
  });
}

vw_status vw_train(const vw_config* cfg, const char* model, const uint64_t* seeds, size_t n_seeds,
                   double missing_frac, const char* config_path, vw_progress_fn progress, void* user, vw_run** out) {
  return guard([&] {
    require(cfg, "cfg");
    require(model, "model");
    require(out, "out");
    if (n_seeds > 0) require(seeds, "seeds");
    pipeline::TrainRequest req;
    req.model = train::parse_model(model);
    if (seeds) req.seeds.assign(seeds, seeds + n_seeds);
    if (missing_frac >= 0.0) req.missing_frac = missing_frac;
    if (config_path) req.config_path = config_path;
    pipeline::ProgressFn fn;
    if (progress) {
      fn = [progress, user](std::uint64_t seed, std::size_t phase, const train::EpochRecord& e) {
        progress(seed, phase, e.epoch, e.train_loss, e.val_loss, e.wall_seconds, user);
      };
    }
    const pipeline::TrainOutcome o = pipeline::run_train(cfg->cfg, req, fn);
    auto* run = new vw_run{o.run_dir.string(), o.config_hash, {}};
    for (const auto& p : o.final_checkpoints) run->checkpoints.push_back(p.string());
    *out = run;
  });
}

const char* vw_run_dir(const vw_run* run) { return run ? run->dir.c_str() : nullptr; }
const char* vw_run_config_hash(const vw_run* run) { return run ? run->hash.c_str() : nullptr; }
size_t vw_run_checkpoint_count(const vw_run* run) { return run ? run->checkpoints.size() : 0; }
const char* vw_run_checkpoint(const vw_run* run, size_t index) {
  return run && index < run->checkpoints.size() ? run->checkpoints[index].c_str() : nullptr;
}
void vw_run_free(vw_run* run) { delete run; }

vw_status vw_eval(const char* const* checkpoints, size_t n_checkpoints, const char* data_csv, double baseline_pb,
                  const char* out_dir, vw_report** out) {
  return guard([&] {
    require(out, "out");
    if (n_checkpoints == 0) throw InvalidArgument("at least one checkpoint is required");
    require(checkpoints, "checkpoints");
    pipeline::EvalRequest req;
    for (size_t i = 0; i < n_checkpoints; ++i) {
      require(checkpoints[i], "checkpoint path");
      req.checkpoints.emplace_back(checkpoints[i]);
    }
    if (data_csv) req.data_path = data_csv;
    if (baseline_pb > 0.0) req.baseline_pb = baseline_pb;
    if (out_dir) req.out_dir = out_dir;
    pipeline::EvalOutcome o = pipeline::run_eval(req);
    std::string text = eval::report_text(o.report);
    *out = new vw_report{std::move(o.report), std::move(text), o.out_dir.string()};
  });
}

double vw_report_n_median(const vw_report* r) { return r ? r->report.n_median_rmse : std::nan(""); }
double vw_report_mean(const vw_report* r) { return r ? r->report.mean : std::nan(""); }
double vw_report_std(const vw_report* r) {
  return r && r->report.stddev ? *r->report.stddev : std::numeric_limits<double>::quiet_NaN();
}
double vw_report_eta(const vw_report* r) { return r ? r->report.eta_percent : std::nan(""); }
size_t vw_report_run_count(const vw_report* r) { return r ? r->report.seed_rmse.size() : 0; }
double vw_report_seed_rmse(const vw_report* r, size_t index) {
  return r && index < r->report.seed_rmse.size() ? r->report.seed_rmse[index] : std::nan("");
}
const char* vw_report_text(const vw_report* r) { return r ? r->text.c_str() : nullptr; }
const char* vw_report_out_dir(const vw_report* r) { return r ? r->out_dir.c_str() : nullptr; }
void vw_report_free(vw_report* r) { delete r; }

vw_status vw_report_dir(const char* runs_dir, char** table) {
  return guard([&] {
    require(runs_dir, "runs_dir");
    require(table, "table");
    *table = dup(pipeline::run_report(runs_dir));
  });
}

}  // extern "C"
