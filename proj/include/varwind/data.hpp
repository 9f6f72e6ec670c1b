#pragma once

// Hourly multimodal records, cleaning, windowing, normalization, masking, and
// the synthetic generator.
//
// Feature channels are laid out as 64 acoustic bands, the reanalysis wind, and
// the in-situ wind (kFeatureChannels = 66). A model state uses either all of
// them or drops the reanalysis channel.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "varwind/autodiff.hpp"

namespace varwind::data {

using ad::Array;

inline constexpr std::size_t kUpaBands = 64;
inline constexpr std::size_t kEcmwfChannel = kUpaBands;
inline constexpr std::size_t kWindChannel = kUpaBands + 1;
inline constexpr std::size_t kFeatureChannels = kUpaBands + 2;
inline constexpr std::size_t kWindowLen = 24;
inline constexpr std::size_t kSplitHours = 1200;

struct HourlyRecord {
  std::int64_t hour = 0;  // hours since 1970-01-01T00:00Z
  std::optional<std::array<double, kUpaBands>> upa;
  std::optional<double> ecmwf;
  std::optional<double> wind;
};

// "YYYY-MM-DDTHH:00:00Z"
std::string format_hour(std::int64_t hour);
// Accepts "YYYY-MM-DDTHH:MM:SS" with optional trailing Z; minutes and seconds must be 0.
std::int64_t parse_hour(const std::string& text);

// CSV with header iso_timestamp,upa_000..upa_063,ecmwf,wind; empty field = missing.
std::vector<HourlyRecord> read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, std::span<const HourlyRecord> records);

// Cleaned hourly table: every row has an in-situ wind value and belongs to a
// calendar day with 24 of them. Missing acoustic/reanalysis values read as 0
// with their mask at 0.
struct Table {
  std::vector<std::int64_t> hours;
  std::vector<double> upa;  // rows x 64
  std::vector<double> ecmwf;
  std::vector<double> wind;
  std::vector<std::uint8_t> upa_mask;
  std::vector<std::uint8_t> ecmwf_mask;

  std::size_t size() const { return hours.size(); }
  // Feature channel value and availability (see layout above).
  double value(std::size_t row, std::size_t channel) const;
  bool present(std::size_t row, std::size_t channel) const;
};

// Requires strictly increasing timestamps (IngestError otherwise). Drops hours
// without in-situ wind, then calendar days (UTC) with fewer than 24 wind values.
Table colocate(std::span<const HourlyRecord> records);

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

// Window start rows inside `rows`. Within each run of consecutive hours of
// length N, starts 0, stride, ... below N - window_len are emitted (N - 24
// windows for stride 1). Shorter runs are skipped with a warning.
std::vector<std::size_t> make_windows(const Table& table, RowRange rows, std::size_t window_len = kWindowLen,
                                      std::size_t stride = 1);

struct Splits {
  RowRange test;
  RowRange validation;
  RowRange train;
};

// By hour offset from the first row: test = first `test_hours`, validation =
// the next `validation_hours`, train = the rest.
Splits split_rows(const Table& table, std::size_t test_hours = kSplitHours,
                  std::size_t validation_hours = kSplitHours);

// `count` window starts drawn uniformly with replacement among the valid
// stride-1 starts of `rows`.
std::vector<std::size_t> sample_train_windows(const Table& table, RowRange rows, std::size_t count,
                                              std::uint64_t seed, std::size_t window_len = kWindowLen);

// Per-channel z-score fitted on present values of the given rows.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Normalizer fit(const Table& table, RowRange rows);
  double normalize(std::size_t channel, double v) const { return (v - mean[channel]) / stddev[channel]; }
  double denormalize(std::size_t channel, double z) const { return z * stddev[channel] + mean[channel]; }
};

enum class Modality { upa, upa_ecmwf };

// State channels: the acoustic bands, optionally the reanalysis wind, then the in-situ wind.
std::vector<std::size_t> state_channels(Modality modality);

struct WindowBatch {
  Array x;      // (B, C, T) normalized, 0 where absent
  Array avail;  // (B, C, T) 1 where present
  Array ecmwf;  // (B, T) reanalysis wind in m/s (NaN where absent)
  std::vector<std::size_t> starts;

  std::size_t channels() const { return x.dim(1); }
};

WindowBatch gather_windows(const Table& table, const Normalizer& norm, Modality modality,
                           std::span<const std::size_t> starts, std::size_t window_len = kWindowLen);

// For every (window, step), with probability p clear all acoustic channels
// (value and availability). Reanalysis and wind entries are untouched.
void apply_missing_mask(WindowBatch& batch, double p, std::uint64_t seed);

// (B, C, T) <-> (B*T, C) with row index b*T + t.
Array windows_to_rows(const Array& x);
Array rows_to_windows(const Array& rows, std::size_t batch, std::size_t steps);

// ---- synthetic data ------------------------------------------------------------

struct SynthConfig {
  std::int64_t start_hour = 394464;  // 2015-01-01T00:00Z
  // wind: softplus(level + amplitude cos(2 pi (hour - phase) / 24) + OU)
  double level = 5.0;
  double diurnal_amplitude = 0.8;
  double diurnal_phase = 3.0;
  double ou_theta = 0.05;
  double ou_sigma = 1.05;
  // acoustic band b: gain_b log10(min(u, u_sat) + 0.5) + 70 - 15 log10(1 + b) + noise
  double u_sat = 15.0;
  double gain_base = 10.0;
  double gain_peak = 15.0;
  double peak_band_low = 10.0;   // ~8 kHz
  double peak_band_high = 26.0;  // ~20 kHz
  double peak_width = 4.0;
  double band_noise = 6.0;
  double shipping_noise = 8.0;
  double shipping_rho = 0.9;
  double shipping_decay = 20.0;  // shipping weight exp(-b / decay)
  // reanalysis: centred 7-hour mean of u + bias + AR(1) error
  double ecmwf_bias = -0.3;
  double ecmwf_rho = 0.7;
  bool calibrate_ecmwf = true;
  double ecmwf_noise = 1.0;  // used when calibration is off
  double target_rmse = 1.71;
  double r2_min = 0.61;
  double r2_max = 0.81;
  std::size_t calibration_hours = 20000;
};

struct SynthStats {
  double rmse = 0.0;  // reanalysis vs in-situ
  double r2 = 0.0;    // squared Pearson correlation
  double max_wind = 0.0;
  double ecmwf_noise = 0.0;
};

// Deterministic per seed. Calibrates the reanalysis error scale to the RMSE
// target over max(n_hours, calibration_hours) hours; throws CalibrationError
// when the target or the R^2 band cannot be met.
std::vector<HourlyRecord> synth_generate(std::size_t n_hours, std::uint64_t seed, const SynthConfig& cfg = {},
                                         SynthStats* stats = nullptr);

// Reanalysis-vs-wind statistics over records holding both.
SynthStats reanalysis_stats(std::span<const HourlyRecord> records);

}  // namespace varwind::data
