// varwind command-line tool: synth, train, eval, report, config.

#include <CLI11.hpp>
#include <cstdio>
#include <mutex>
#include <string>
#include <vector>

#include "varwind/varwind.h"

namespace {

int fail(vw_status s) {
  std::fprintf(stderr, "error (%s): %s\n", vw_status_string(s), vw_last_error());
  return static_cast<int>(s);
}

std::vector<uint64_t> parse_seeds(const std::string& text) {
  std::vector<uint64_t> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const uint64_t lo = std::stoull(text.substr(0, dots)), hi = std::stoull(text.substr(dots + 2));
    if (hi < lo) throw CLI::ValidationError("--seeds", "empty range " + text);
    for (uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t used = 0;
    out.push_back(std::stoull(item, &used));
    if (used != item.size()) throw CLI::ValidationError("--seeds", "bad seed '" + item + "'");
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

struct Progress {
  std::mutex mutex;
  bool quiet = false;
};

void on_epoch(uint64_t seed, size_t phase, size_t epoch, double train_loss, double val_loss, double wall,
              void* user) {
  auto* p = static_cast<Progress*>(user);
  if (p->quiet) return;
  std::lock_guard<std::mutex> lock(p->mutex);
  std::fprintf(stderr, "seed %llu phase %zu epoch %zu  train %.6f  val %.6f  (%.1fs)\n",
               static_cast<unsigned long long>(seed), phase, epoch, train_loss, val_loss, wall);
}

// Loads --config (or the defaults) and applies --set key=value overrides.
vw_status load_config(const std::string& path, const std::vector<std::string>& overrides, vw_config** cfg) {
  vw_status s = path.empty() ? vw_config_default(cfg) : vw_config_load(path.c_str(), cfg);
  if (s != VW_OK) return s;
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      vw_config_free(*cfg);
      *cfg = nullptr;
      return VW_ERR_INVALID_ARGUMENT;
    }
    s = vw_config_set(*cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (s != VW_OK) {
      vw_config_free(*cfg);
      *cfg = nullptr;
      return s;
    }
  }
  return VW_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wind speed reconstruction from underwater acoustics by learned variational assimilation"};
  app.set_version_flag("--version", vw_version());
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic hourly dataset (CSV)");
  std::size_t hours = 20000;
  uint64_t synth_seed = 0;
  std::string synth_out, synth_config;
  synth->add_option("--hours", hours, "Number of hours")->check(CLI::Range(48, 100000000));
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--out", synth_out, "Output CSV")->required();
  synth->add_option("--config", synth_config, "Configuration file with [synth] settings")->check(CLI::ExistingFile);

  // train
  auto* trainc = app.add_subcommand("train", "Train a model for one or more seeds");
  std::string train_config, model = "varnet-upa-ecmwf", seeds_text;
  double missing = -1.0;
  bool quiet = false;
  std::vector<std::string> train_sets;
  trainc->add_option("--config", train_config, "Configuration file (defaults if omitted)")->check(CLI::ExistingFile);
  trainc->add_option("--model", model, "fcae-ti, fcae-td, convae-upa, convae-upa-ecmwf, varnet-upa, varnet-upa-ecmwf");
  trainc->add_option("--seeds", seeds_text, "Seeds as 0..9 or 0,3,7");
  trainc->add_option("--missing-frac", missing, "Fraction of hours with the acoustic spectrum removed")
      ->check(CLI::Range(0.0, 0.9));
  trainc->add_option("--set", train_sets, "Override a configuration key (section.key=value)");
  trainc->add_flag("--quiet", quiet, "No per-epoch progress");

  // eval
  auto* evalc = app.add_subcommand("eval", "Evaluate checkpoints on the test block");
  std::vector<std::string> checkpoints;
  std::string eval_data, eval_out;
  double baseline_pb = 0.0;
  evalc->add_option("--checkpoints", checkpoints, "Checkpoint files (one per seed)")->required()->check(
      CLI::ExistingFile);
  evalc->add_option("--data", eval_data, "Dataset CSV (defaults to the training configuration)");
  evalc->add_option("--baseline-pb", baseline_pb, "Baseline n-Median RMSE for the relative gain (default 0.95)")
      ->check(CLI::PositiveNumber);
  evalc->add_option("--out", eval_out, "Output directory (default: <checkpoint dir>/eval)");

  // report
  auto* reportc = app.add_subcommand("report", "Merge every report below a directory into one table");
  std::string runs_dir;
  reportc->add_option("--runs-dir", runs_dir, "Directory holding evaluation outputs")->required()->check(
      CLI::ExistingDirectory);

  // config
  auto* configc = app.add_subcommand("config", "Print the resolved configuration and its hash");
  std::string show_config;
  std::vector<std::string> config_sets;
  configc->add_option("--config", show_config, "Configuration file")->check(CLI::ExistingFile);
  configc->add_option("--set", config_sets, "Override a configuration key (section.key=value)");

  CLI11_PARSE(app, argc, argv);

  if (*synth) {
    vw_config* cfg = nullptr;
    if (!synth_config.empty()) {
      if (vw_status s = vw_config_load(synth_config.c_str(), &cfg); s != VW_OK) return fail(s);
    }
    vw_synth_stats stats{};
    const vw_status s = vw_synth(hours, synth_seed, cfg, synth_out.c_str(), &stats);
    vw_config_free(cfg);
    if (s != VW_OK) return fail(s);
    std::printf("wrote %zu hours to %s\nreanalysis RMSE %.3f m/s, R^2 %.3f, max wind %.2f m/s\n", hours,
                synth_out.c_str(), stats.rmse, stats.r2, stats.max_wind);
    return 0;
  }

  if (*trainc) {
    vw_config* cfg = nullptr;
    if (vw_status s = load_config(train_config, train_sets, &cfg); s != VW_OK) return fail(s);
    std::vector<uint64_t> seeds;
    try {
      if (!seeds_text.empty()) seeds = parse_seeds(seeds_text);
    } catch (const std::exception& e) {
      vw_config_free(cfg);
      std::fprintf(stderr, "error: invalid --seeds '%s'\n", seeds_text.c_str());
      return static_cast<int>(VW_ERR_INVALID_ARGUMENT);
    }
    Progress progress;
    progress.quiet = quiet;
    vw_run* run = nullptr;
    const vw_status s = vw_train(cfg, model.c_str(), seeds.empty() ? nullptr : seeds.data(), seeds.size(), missing,
                                 train_config.empty() ? nullptr : train_config.c_str(), on_epoch, &progress, &run);
    vw_config_free(cfg);
    if (s != VW_OK) return fail(s);
    std::printf("run directory %s (config %s)\n", vw_run_dir(run), vw_run_config_hash(run));
    for (size_t i = 0; i < vw_run_checkpoint_count(run); ++i) std::printf("%s\n", vw_run_checkpoint(run, i));
    vw_run_free(run);
    return 0;
  }

  if (*evalc) {
    std::vector<const char*> paths;
    for (const auto& c : checkpoints) paths.push_back(c.c_str());
    vw_report* report = nullptr;
    const vw_status s = vw_eval(paths.data(), paths.size(), eval_data.empty() ? nullptr : eval_data.c_str(),
                                baseline_pb, eval_out.empty() ? nullptr : eval_out.c_str(), &report);
    if (s != VW_OK) return fail(s);
    std::printf("%swritten to %s\n", vw_report_text(report), vw_report_out_dir(report));
    vw_report_free(report);
    return 0;
  }

  if (*reportc) {
    char* table = nullptr;
    if (vw_status s = vw_report_dir(runs_dir.c_str(), &table); s != VW_OK) return fail(s);
    std::fputs(table, stdout);
    vw_string_free(table);
    return 0;
  }

  if (*configc) {
    vw_config* cfg = nullptr;
    if (vw_status s = load_config(show_config, config_sets, &cfg); s != VW_OK) return fail(s);
    char *text = nullptr, *hash = nullptr;
    vw_status s = vw_config_to_ini(cfg, &text);
    if (s == VW_OK) s = vw_config_hash(cfg, &hash);
    vw_config_free(cfg);
    if (s != VW_OK) {
      vw_string_free(text);
      return fail(s);
    }
    std::printf("; config hash %s\n%s", hash, text);
    vw_string_free(text);
    vw_string_free(hash);
    return 0;
  }
  return 0;
}
