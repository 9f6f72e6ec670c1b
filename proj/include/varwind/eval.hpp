#pragma once

// Metrics, multi-run aggregation and evaluation reports. All metrics are in m/s.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "varwind/train.hpp"

namespace varwind::eval {

// sqrt(mean((pred - truth)^2)); InvalidArgument on empty or unequal inputs.
double rmse(std::span<const double> pred, std::span<const double> truth);

// Elementwise median across runs (mean of the two central values for an even count).
std::vector<double> n_median_aggregate(const std::vector<std::vector<double>>& runs);

// (1 - p_i / p_b) * 100; InvalidArgument unless p_b > 0.
double relative_gain_exact(double p_b, double p_i);
// Same, rounded to 0.1.
double relative_gain(double p_b, double p_i);

// Mean of (pred - truth) per position within the window; inputs are (W, T) row-major.
std::vector<double> hourly_error_profile(std::span<const double> preds, std::span<const double> truths,
                                         std::size_t window_len = data::kWindowLen);

// Predictions of one model over the test block.
struct TestPrediction {
  std::vector<std::int64_t> hours;   // one per test hour covered by a window
  std::vector<double> wind;          // in-situ truth
  std::vector<double> ecmwf;         // NaN where absent
  std::vector<double> pred;          // mean over covering windows
  std::vector<double> window_pred;   // (W, T) per window, m/s
  std::vector<double> window_truth;  // (W, T)
};

// Test windows use stride 1 over the test block. Missing-data masking uses a
// seed that depends only on `mask_seed` and the batch, so every model sees the
// same masks.
TestPrediction predict_test(train::ModelKind kind, const nn::ParamSet& params, std::size_t n_iter,
                            const train::Dataset& ds, const train::TrainConfig& cfg, std::size_t batch_size = 64);

struct Quartiles {
  double q1 = 0.0, median = 0.0, q3 = 0.0;
};

// Linear-interpolation quartiles of a non-empty sample.
Quartiles quartiles(std::vector<double> values);

struct ScatterRow {
  std::int64_t hour = 0;
  double truth = 0.0;
  double pred = 0.0;
  double ecmwf = 0.0;  // NaN where absent
};

struct EvalReport {
  std::string model;
  std::string config_hash;
  double missing_frac = 0.0;
  std::size_t n_iter = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> seed_rmse;
  double mean = 0.0;
  std::optional<double> stddev;  // sample std, needs >= 2 runs
  Quartiles quartile;
  double n_median_rmse = 0.0;
  double baseline_pb = 0.95;
  double eta_percent = 0.0;  // rounded to 0.1
  std::vector<double> hourly_mean_error;  // n-Median aggregate, per window position
  std::vector<ScatterRow> scatter;        // n-Median aggregate
};

// Combines per-seed test predictions (same test block) into a report.
EvalReport make_report(const std::string& model, const std::vector<std::uint64_t>& seeds,
                       const std::vector<TestPrediction>& runs, double baseline_pb);

std::string report_text(const EvalReport& r);
std::string report_json(const EvalReport& r);
EvalReport parse_report_json(const std::string& text);  // IoError on malformed input
std::string hourly_profile_csv(const EvalReport& r);
std::string scatter_csv(const EvalReport& r);

// Table sorted by missing fraction, then n-Median (descending).
std::string comparison_table(std::vector<EvalReport> reports);

}  // namespace varwind::eval
