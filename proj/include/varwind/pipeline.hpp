#pragma once

// File-level workflow behind the command-line tool: dataset generation,
// multi-seed training with checkpoints and curves, evaluation and reports.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "varwind/config.hpp"
#include "varwind/eval.hpp"

namespace varwind::pipeline {

namespace fs = std::filesystem;

data::SynthStats run_synth(std::size_t hours, std::uint64_t seed, const data::SynthConfig& cfg, const fs::path& out);

// VARWIND_OUTPUT_ROOT overrides cfg.output_root when set and non-empty.
fs::path output_root(const config::Config& cfg);

// Reads data.path, or generates the synthetic series when it is empty.
train::Dataset load_dataset(const config::Config& cfg);

struct TrainRequest {
  train::ModelKind model = train::ModelKind::varnet_upa_ecmwf;
  std::vector<std::uint64_t> seeds;   // empty: the configured seeds
  std::optional<double> missing_frac;  // overrides train.missing_frac
  std::string config_path;             // recorded in the manifest
};

struct TrainOutcome {
  fs::path run_dir;
  std::string config_hash;
  std::vector<fs::path> final_checkpoints;  // one per seed, in seed order
};

using ProgressFn = std::function<void(std::uint64_t seed, std::size_t phase, const train::EpochRecord&)>;

// Writes under <root>/<model>-m<percent>-<hash>/: the resolved config, one
// curve CSV and one best checkpoint per seed and phase, and manifest.json.
// Progress callbacks may arrive from several worker threads.
TrainOutcome run_train(config::Config cfg, const TrainRequest& request, const ProgressFn& progress = {});

std::string checkpoint_name(const std::string& hash, train::ModelKind model, std::size_t phase, std::uint64_t seed,
                            std::size_t epoch);
std::string curves_csv(const std::vector<train::EpochRecord>& curve);

struct EvalRequest {
  std::vector<fs::path> checkpoints;
  std::string data_path;              // empty: dataset named by the checkpoints' config
  std::optional<double> baseline_pb;  // overrides eval.baseline_pb
  fs::path out_dir;                   // empty: <run dir>/eval
};

struct EvalOutcome {
  eval::EvalReport report;
  fs::path out_dir;
};

// All checkpoints must come from the same model and configuration
// (ConfigError otherwise). Writes report.txt, report.json,
// hourly_profile.csv and scatter.csv.
EvalOutcome run_eval(const EvalRequest& request);

// Collects every report.json below runs_dir into one table, also written to
// runs_dir/summary.txt.
std::string run_report(const fs::path& runs_dir);

}  // namespace varwind::pipeline
