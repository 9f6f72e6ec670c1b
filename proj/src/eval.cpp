#include "varwind/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "varwind/errors.hpp"

namespace varwind::eval {

using json = nlohmann::json;

namespace {

double median_of(std::vector<double>& v) {
  const std::size_t n = v.size(), mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.empty()) throw InvalidArgument("rmse of an empty series");
  if (pred.size() != truth.size()) {
    throw InvalidArgument("rmse length mismatch: " + std::to_string(pred.size()) + " vs " +
                          std::to_string(truth.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

std::vector<double> n_median_aggregate(const std::vector<std::vector<double>>& runs) {
  if (runs.empty()) throw InvalidArgument("n-Median needs at least one run");
  const std::size_t n = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != n) throw ShapeError("n-Median runs have different lengths");
  std::vector<double> out(n), column(runs.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < runs.size(); ++k) column[k] = runs[k][i];
    out[i] = median_of(column);
  }
  return out;
}

double relative_gain_exact(double p_b, double p_i) {
  if (!(p_b > 0.0)) throw InvalidArgument("baseline RMSE must be positive");
  return (1.0 - p_i / p_b) * 100.0;
}

double relative_gain(double p_b, double p_i) {
  const double r = std::round(relative_gain_exact(p_b, p_i) * 10.0) / 10.0;
  return r == 0.0 ? 0.0 : r;
}

std::vector<double> hourly_error_profile(std::span<const double> preds, std::span<const double> truths,
                                         std::size_t window_len) {
  if (window_len == 0 || preds.size() != truths.size() || preds.size() % window_len != 0) {
    throw ShapeError("hourly profile expects whole windows of equal size");
  }
  std::vector<double> profile(window_len, 0.0);
  const std::size_t windows = preds.size() / window_len;
  if (windows == 0) return profile;
  for (std::size_t w = 0; w < windows; ++w)
    for (std::size_t t = 0; t < window_len; ++t) profile[t] += preds[w * window_len + t] - truths[w * window_len + t];
  for (double& v : profile) v /= static_cast<double>(windows);
  return profile;
}

TestPrediction predict_test(train::ModelKind kind, const nn::ParamSet& params, std::size_t n_iter,
                            const train::Dataset& ds, const train::TrainConfig& cfg, std::size_t batch_size) {
  const std::vector<std::size_t> starts = data::make_windows(ds.table, ds.splits.test);
  if (starts.empty()) throw InvalidArgument("test block holds no complete window");
  const std::size_t T = data::kWindowLen;
  const std::size_t first = *std::min_element(starts.begin(), starts.end());
  const std::size_t last = *std::max_element(starts.begin(), starts.end()) + T;

  TestPrediction out;
  std::vector<double> sum(last - first, 0.0);
  std::vector<std::size_t> cover(last - first, 0);
  const data::Modality modality = train::model_modality(kind);
  for (std::size_t i = 0, k = 0; i < starts.size(); i += batch_size, ++k) {
    const std::size_t n = std::min(batch_size, starts.size() - i);
    data::WindowBatch wb = data::gather_windows(ds.table, ds.normalizer, modality, std::span(starts).subspan(i, n));
    data::apply_missing_mask(wb, cfg.missing_frac, train::mix_seed({cfg.mask_seed, 0x74657374, k}));
    const ad::Array z = train::predict_wind(kind, params, wb, n_iter, cfg.assim);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t row = starts[i + b] + t;
        const double p = ds.normalizer.denormalize(data::kWindChannel, z[b * T + t]);
        out.window_pred.push_back(p);
        out.window_truth.push_back(ds.table.wind[row]);
        sum[row - first] += p;
        ++cover[row - first];
      }
  }
  for (std::size_t r = 0; r < sum.size(); ++r) {
    if (cover[r] == 0) continue;
    const std::size_t row = first + r;
    out.hours.push_back(ds.table.hours[row]);
    out.wind.push_back(ds.table.wind[row]);
    out.ecmwf.push_back(ds.table.ecmwf_mask[row] ? ds.table.ecmwf[row] : std::numeric_limits<double>::quiet_NaN());
    out.pred.push_back(sum[r] / static_cast<double>(cover[r]));
  }
  return out;
}

Quartiles quartiles(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("quartiles of an empty sample");
  std::sort(v.begin(), v.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {at(0.25), at(0.5), at(0.75)};
}

EvalReport make_report(const std::string& model, const std::vector<std::uint64_t>& seeds,
                       const std::vector<TestPrediction>& runs, double baseline_pb) {
  if (runs.empty()) throw InvalidArgument("report needs at least one run");
  if (seeds.size() != runs.size()) throw InvalidArgument("one seed per run is required");
  EvalReport r;
  r.model = model;
  r.seeds = seeds;
  std::vector<std::vector<double>> hourly, windowed;
  for (const TestPrediction& p : runs) {
    if (p.hours != runs.front().hours) throw ShapeError("runs cover different test hours");
    r.seed_rmse.push_back(rmse(p.pred, p.wind));
    hourly.push_back(p.pred);
    windowed.push_back(p.window_pred);
  }
  const double n = static_cast<double>(r.seed_rmse.size());
  for (double v : r.seed_rmse) r.mean += v / n;
  if (r.seed_rmse.size() >= 2) {
    double ss = 0.0;
    for (double v : r.seed_rmse) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / (n - 1.0));
  }
  r.quartile = quartiles(r.seed_rmse);
  const TestPrediction& ref = runs.front();
  const std::vector<double> agg = n_median_aggregate(hourly);
  r.n_median_rmse = rmse(agg, ref.wind);
  r.baseline_pb = baseline_pb;
  r.eta_percent = relative_gain(baseline_pb, r.n_median_rmse);
  r.hourly_mean_error = hourly_error_profile(n_median_aggregate(windowed), ref.window_truth);
  for (std::size_t i = 0; i < agg.size(); ++i) r.scatter.push_back({ref.hours[i], ref.wind[i], agg[i], ref.ecmwf[i]});
  return r;
}

std::string report_text(const EvalReport& r) {
  std::ostringstream os;
  os << "model          " << r.model << "\n";
  os << "config hash    " << r.config_hash << "\n";
  os << "missing frac   " << fixed(r.missing_frac, 2) << "\n";
  os << "solver iters   " << r.n_iter << "\n";
  os << "runs           " << r.seed_rmse.size() << "\n";
  for (std::size_t i = 0; i < r.seeds.size(); ++i)
    os << "  seed " << r.seeds[i] << "  RMSE " << fixed(r.seed_rmse[i], 4) << " m/s\n";
  os << "mean +- std    " << fixed(r.mean, 4);
  if (r.stddev) os << " +- " << fixed(*r.stddev, 4);
  os << " m/s\n";
  os << "quartiles      " << fixed(r.quartile.q1, 4) << " / " << fixed(r.quartile.median, 4) << " / "
     << fixed(r.quartile.q3, 4) << " m/s\n";
  os << "n-Median RMSE  " << fixed(r.n_median_rmse, 4) << " m/s\n";
  os << "gain vs " << fixed(r.baseline_pb, 2) << "   " << fixed(r.eta_percent, 1) << " %\n";
  return os.str();
}

std::string report_json(const EvalReport& r) {
  json j;
  j["model"] = r.model;
  j["config_hash"] = r.config_hash;
  j["missing_frac"] = r.missing_frac;
  j["n_iter"] = r.n_iter;
  j["seeds"] = r.seeds;
  j["seed_rmse"] = r.seed_rmse;
  j["mean"] = r.mean;
  j["std"] = r.stddev ? json(*r.stddev) : json(nullptr);
  j["quartiles"] = {r.quartile.q1, r.quartile.median, r.quartile.q3};
  j["n_median_rmse"] = r.n_median_rmse;
  j["baseline_pb"] = r.baseline_pb;
  j["eta_percent"] = r.eta_percent;
  j["hourly_mean_error"] = r.hourly_mean_error;
  return j.dump(2) + "\n";
}

EvalReport parse_report_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.model = j.at("model").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.missing_frac = j.at("missing_frac").get<double>();
    r.n_iter = j.at("n_iter").get<std::size_t>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.seed_rmse = j.at("seed_rmse").get<std::vector<double>>();
    r.mean = j.at("mean").get<double>();
    if (!j.at("std").is_null()) r.stddev = j.at("std").get<double>();
    const auto q = j.at("quartiles").get<std::vector<double>>();
    if (q.size() != 3) throw IoError("report quartiles must hold 3 values");
    r.quartile = {q[0], q[1], q[2]};
    r.n_median_rmse = j.at("n_median_rmse").get<double>();
    r.baseline_pb = j.at("baseline_pb").get<double>();
    r.eta_percent = j.at("eta_percent").get<double>();
    r.hourly_mean_error = j.at("hourly_mean_error").get<std::vector<double>>();
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed report: ") + e.what());
  }
}

std::string hourly_profile_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "position,mean_error\n" << std::setprecision(17);
  for (std::size_t t = 0; t < r.hourly_mean_error.size(); ++t) os << t << ',' << r.hourly_mean_error[t] << '\n';
  return os.str();
}

std::string scatter_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "iso_timestamp,truth,prediction,ecmwf\n" << std::setprecision(17);
  for (const ScatterRow& s : r.scatter) {
    os << data::format_hour(s.hour) << ',' << s.truth << ',' << s.pred << ',';
    if (std::isfinite(s.ecmwf)) os << s.ecmwf;
    os << '\n';
  }
  return os.str();
}

std::string comparison_table(std::vector<EvalReport> reports) {
  std::stable_sort(reports.begin(), reports.end(), [](const EvalReport& a, const EvalReport& b) {
    if (a.missing_frac != b.missing_frac) return a.missing_frac < b.missing_frac;
    return a.n_median_rmse > b.n_median_rmse;
  });
  std::ostringstream os;
  os << std::left << std::setw(20) << "model" << std::setw(9) << "missing" << std::setw(7) << "iters"
     << std::setw(20) << "mean +- std" << std::setw(10) << "n-Median" << "gain %\n";
  for (const EvalReport& r : reports) {
    std::string ms = fixed(r.mean, 3) + (r.stddev ? " +- " + fixed(*r.stddev, 3) : "");
    os << std::left << std::setw(20) << r.model << std::setw(9) << fixed(r.missing_frac, 2) << std::setw(7)
       << r.n_iter << std::setw(20) << ms << std::setw(10) << fixed(r.n_median_rmse, 3)
       << fixed(r.eta_percent, 1) << '\n';
  }
  return os.str();
}

}  // namespace varwind::eval
