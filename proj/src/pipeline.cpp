#include "varwind/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "varwind/errors.hpp"

namespace varwind::pipeline {

using json = nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out.flush()) throw IoError("write failed for " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string percent_tag(double frac) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d", static_cast<int>(std::lround(frac * 100.0)));
  return buf;
}

std::string shortest(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

const std::string& meta(const nn::Checkpoint& c, const std::string& key, const fs::path& path) {
  const auto it = c.metadata.find(key);
  if (it == c.metadata.end()) throw CheckpointError(path.string() + " lacks metadata '" + key + "'");
  return it->second;
}

}  // namespace

data::SynthStats run_synth(std::size_t hours, std::uint64_t seed, const data::SynthConfig& cfg, const fs::path& out) {
  data::SynthStats stats;
  const auto records = data::synth_generate(hours, seed, cfg, &stats);
  if (out.has_parent_path()) make_dirs(out.parent_path());
  data::write_csv(out, records);
  return stats;
}

fs::path output_root(const config::Config& cfg) {
  if (const char* env = std::getenv("VARWIND_OUTPUT_ROOT"); env && *env) return env;
  return cfg.output_root;
}

train::Dataset load_dataset(const config::Config& cfg) {
  std::vector<data::HourlyRecord> records = cfg.data_path.empty()
                                                ? data::synth_generate(cfg.synth_hours, cfg.synth_seed, cfg.synth)
                                                : data::read_csv(cfg.data_path);
  return train::Dataset::prepare(data::colocate(records), cfg.train);
}

std::string checkpoint_name(const std::string& hash, train::ModelKind model, std::size_t phase, std::uint64_t seed,
                            std::size_t epoch) {
  return "ckpt_" + hash + "_" + std::string(train::model_name(model)) + "_p" + std::to_string(phase) + "_s" +
         std::to_string(seed) + "_e" + std::to_string(epoch) + ".bin";
}

std::string curves_csv(const std::vector<train::EpochRecord>& curve) {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,wall_seconds\n" << std::setprecision(17);
  for (const auto& e : curve) os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.wall_seconds << '\n';
  return os.str();
}

TrainOutcome run_train(config::Config cfg, const TrainRequest& request, const ProgressFn& progress) {
  if (!request.seeds.empty()) cfg.train.seeds = request.seeds;
  if (request.missing_frac) cfg.train.missing_frac = *request.missing_frac;
  cfg.validate();
  const std::string started = utc_now();
  const std::string hash = config::hash(cfg);
  const std::string model(train::model_name(request.model));

  const train::Dataset ds = load_dataset(cfg);
  TrainOutcome out;
  out.config_hash = hash;
  out.run_dir = output_root(cfg) / (model + "-m" + percent_tag(cfg.train.missing_frac) + "-" + hash);
  make_dirs(out.run_dir);
  const std::string ini = config::to_ini(cfg);
  write_text(out.run_dir / "config.ini", ini);

  const auto results = train::train_seeds(request.model, ds, cfg.train.seeds, cfg.train, progress);

  json checkpoints = json::array();
  for (const train::SeedResult& r : results) {
    for (const train::PhaseResult& p : r.phases) {
      const std::string tag = "_s" + std::to_string(r.seed) + "_p" + std::to_string(p.phase);
      write_text(out.run_dir / ("curves_" + model + tag + ".csv"), curves_csv(p.curve));

      nn::Checkpoint c;
      c.config_hash = hash;
      c.epoch = p.best_epoch;
      c.metadata = {{"model", model},
                    {"phase", std::to_string(p.phase)},
                    {"seed", std::to_string(r.seed)},
                    {"n_iter", std::to_string(p.n_iter)},
                    {"missing_frac", shortest(cfg.train.missing_frac)},
                    {"val_loss", shortest(p.best_val_loss)},
                    {"config", ini}};
      c.tensors = p.best_params;
      c.tensors["norm.mean"] = ad::Array({ds.normalizer.mean.size()}, ds.normalizer.mean);
      c.tensors["norm.std"] = ad::Array({ds.normalizer.stddev.size()}, ds.normalizer.stddev);
      const fs::path path = out.run_dir / checkpoint_name(hash, request.model, p.phase, r.seed, p.best_epoch);
      nn::save_checkpoint(path, c);
      checkpoints.push_back({{"seed", r.seed}, {"phase", p.phase}, {"epoch", p.best_epoch}, {"file", path.filename()}});
      if (&p == &r.final_phase()) out.final_checkpoints.push_back(path);
    }
  }

  json manifest;
  manifest["config_path"] = request.config_path;
  manifest["config_hash"] = hash;
  manifest["model"] = model;
  manifest["missing_frac"] = cfg.train.missing_frac;
  manifest["seeds"] = cfg.train.seeds;
  manifest["output_dir"] = out.run_dir.string();
  manifest["started_at"] = started;
  manifest["finished_at"] = utc_now();
  manifest["checkpoints"] = checkpoints;
  json finals = json::array();
  for (const auto& p : out.final_checkpoints) finals.push_back(p.filename().string());
  manifest["final_checkpoints"] = finals;
  write_text(out.run_dir / "manifest.json", manifest.dump(2) + "\n");
  return out;
}

EvalOutcome run_eval(const EvalRequest& request) {
  if (request.checkpoints.empty()) throw InvalidArgument("evaluation needs at least one checkpoint");
  std::vector<nn::Checkpoint> loaded;
  for (const fs::path& p : request.checkpoints) loaded.push_back(nn::load_checkpoint(p));

  const nn::Checkpoint& first = loaded.front();
  const fs::path& first_path = request.checkpoints.front();
  const std::string model_text = meta(first, "model", first_path);
  const std::string n_iter_text = meta(first, "n_iter", first_path);
  std::set<std::uint64_t> seen;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    const nn::Checkpoint& c = loaded[i];
    const fs::path& path = request.checkpoints[i];
    if (c.config_hash != first.config_hash) {
      throw ConfigError("checkpoint " + path.string() + " has config hash " + c.config_hash + ", expected " +
                        first.config_hash);
    }
    if (meta(c, "model", path) != model_text || meta(c, "n_iter", path) != n_iter_text) {
      throw ConfigError("checkpoint " + path.string() + " holds a different model or solver setting");
    }
    const std::uint64_t seed = std::stoull(meta(c, "seed", path));
    if (!seen.insert(seed).second) throw InvalidArgument("seed " + std::to_string(seed) + " given twice");
    seeds.push_back(seed);
  }

  config::Config cfg = config::parse(meta(first, "config", first_path));
  if (config::hash(cfg) != first.config_hash) {
    throw ConfigError("checkpoint configuration does not match its recorded hash " + first.config_hash);
  }
  if (!request.data_path.empty()) cfg.data_path = request.data_path;
  const train::ModelKind kind = train::parse_model(model_text);
  const std::size_t n_iter = std::stoull(n_iter_text);

  train::Dataset ds = load_dataset(cfg);
  ds.normalizer.mean = first.tensors.at("norm.mean").to_vector();
  ds.normalizer.stddev = first.tensors.at("norm.std").to_vector();

  std::vector<eval::TestPrediction> runs;
  for (const nn::Checkpoint& c : loaded) {
    nn::ParamSet params = c.tensors;
    params.erase("norm.mean");
    params.erase("norm.std");
    runs.push_back(eval::predict_test(kind, params, n_iter, ds, cfg.train));
  }
  EvalOutcome out;
  out.report = eval::make_report(model_text, seeds, runs, request.baseline_pb.value_or(cfg.baseline_pb));
  out.report.config_hash = first.config_hash;
  out.report.missing_frac = cfg.train.missing_frac;
  out.report.n_iter = is_varnet(kind) ? n_iter : 0;

  out.out_dir = request.out_dir.empty() ? first_path.parent_path() / "eval" : request.out_dir;
  make_dirs(out.out_dir);
  write_text(out.out_dir / "report.txt", eval::report_text(out.report));
  write_text(out.out_dir / "report.json", eval::report_json(out.report));
  write_text(out.out_dir / "hourly_profile.csv", eval::hourly_profile_csv(out.report));
  write_text(out.out_dir / "scatter.csv", eval::scatter_csv(out.report));
  return out;
}

std::string run_report(const fs::path& runs_dir) {
  std::error_code ec;
  if (!fs::is_directory(runs_dir, ec)) throw IoError("not a directory: " + runs_dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(runs_dir))
    if (entry.is_regular_file() && entry.path().filename() == "report.json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<eval::EvalReport> reports;
  for (const fs::path& f : files) reports.push_back(eval::parse_report_json(read_text(f)));
  const std::string table = eval::comparison_table(std::move(reports));
  write_text(runs_dir / "summary.txt", table);
  return table;
}

}  // namespace varwind::pipeline
