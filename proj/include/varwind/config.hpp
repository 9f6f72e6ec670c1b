#pragma once

// Experiment configuration: one INI-style file with sections, every
// hyperparameter pre-filled with its default.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "varwind/data.hpp"
#include "varwind/train.hpp"

namespace varwind::config {

struct Config {
  std::string data_path;  // CSV dataset; empty means generate synthetic data
  std::size_t synth_hours = 20000;
  std::uint64_t synth_seed = 0;
  data::SynthConfig synth;
  train::TrainConfig train;
  double baseline_pb = 0.95;
  std::string output_root = "runs";

  void validate() const;  // ConfigError
};

// Keys are "section.name". Unknown keys and unparsable values raise ConfigError.
Config parse(const std::string& text);
Config load(const std::filesystem::path& path);  // IoError if unreadable
std::string to_ini(const Config& cfg);

std::vector<std::string> keys();
std::string get(const Config& cfg, const std::string& key);
void set(Config& cfg, const std::string& key, const std::string& value);

// 16 hex digits identifying everything that affects results (the output
// location and thread count are excluded).
std::string hash(const Config& cfg);

// "0,1,5" or "0..9"
std::vector<std::uint64_t> parse_seeds(const std::string& text);
std::string format_seeds(const std::vector<std::uint64_t>& seeds);

}  // namespace varwind::config
