#include <algorithm>
#include <cmath>
#include <numbers>

#include "varwind/data.hpp"
#include "varwind/errors.hpp"

namespace varwind::data {

namespace {

// Independent generator per component so that series lengths do not shift
// each other's draws.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t component) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(component)};
  return std::mt19937_64(seq);
}

double softplus(double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); }

std::vector<double> wind_series(std::size_t n, std::uint64_t seed, const SynthConfig& cfg) {
  auto rng = stream(seed, 1);
  std::normal_distribution<double> normal;
  std::vector<double> u(n);
  // stationary start for the OU component
  double z = cfg.ou_theta > 0.0 ? normal(rng) * cfg.ou_sigma / std::sqrt(2.0 * cfg.ou_theta) : 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) z += -cfg.ou_theta * z + cfg.ou_sigma * normal(rng);
    const double hour_of_day = static_cast<double>((cfg.start_hour + static_cast<std::int64_t>(t)) % 24);
    const double diurnal =
        cfg.diurnal_amplitude * std::cos(2.0 * std::numbers::pi * (hour_of_day - cfg.diurnal_phase) / 24.0);
    u[t] = softplus(cfg.level + diurnal + z);
  }
  return u;
}

std::vector<double> moving_average7(const std::vector<double>& u) {
  const std::size_t n = u.size();
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    double s = 0.0;
    for (int k = -3; k <= 3; ++k) {
      const auto i = std::clamp<long>(static_cast<long>(t) + k, 0, static_cast<long>(n) - 1);
      s += u[static_cast<std::size_t>(i)];
    }
    out[t] = s / 7.0;
  }
  return out;
}

// Unit-variance AR(1).
std::vector<double> ar1(std::size_t n, double rho, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<double> e(n);
  const double innov = std::sqrt(1.0 - rho * rho);
  for (std::size_t t = 0; t < n; ++t) e[t] = t == 0 ? normal(rng) : rho * e[t - 1] + innov * normal(rng);
  return e;
}

struct PairStats {
  double rmse;
  double r2;
};

PairStats pair_stats(const std::vector<double>& e, const std::vector<double>& u) {
  const std::size_t n = u.size();
  double mu = 0.0, me = 0.0, sq = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    mu += u[t];
    me += e[t];
    sq += (e[t] - u[t]) * (e[t] - u[t]);
  }
  mu /= static_cast<double>(n);
  me /= static_cast<double>(n);
  double suu = 0.0, see = 0.0, sue = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    suu += (u[t] - mu) * (u[t] - mu);
    see += (e[t] - me) * (e[t] - me);
    sue += (u[t] - mu) * (e[t] - me);
  }
  const double r = (suu > 0.0 && see > 0.0) ? sue / std::sqrt(suu * see) : std::nan("");
  return {std::sqrt(sq / static_cast<double>(n)), r * r};
}

std::vector<double> reanalysis(const std::vector<double>& smooth, const std::vector<double>& eta, double bias,
                               double scale) {
  std::vector<double> e(smooth.size());
  for (std::size_t t = 0; t < e.size(); ++t) e[t] = std::max(0.0, smooth[t] + bias + scale * eta[t]);
  return e;
}

}  // namespace

std::vector<HourlyRecord> synth_generate(std::size_t n_hours, std::uint64_t seed, const SynthConfig& cfg,
                                         SynthStats* stats) {
  if (n_hours < 48) throw InvalidArgument("synthetic series needs at least 48 hours");
  if (cfg.ou_theta < 0.0 || cfg.ou_theta >= 1.0 || cfg.ou_sigma < 0.0) throw InvalidArgument("bad OU parameters");
  if (std::abs(cfg.ecmwf_rho) >= 1.0 || std::abs(cfg.shipping_rho) >= 1.0) {
    throw InvalidArgument("AR(1) coefficients must lie in (-1, 1)");
  }
  const std::size_t total = cfg.calibrate_ecmwf ? std::max(n_hours, cfg.calibration_hours) : n_hours;
  const std::vector<double> u = wind_series(total, seed, cfg);
  const std::vector<double> smooth = moving_average7(u);
  auto eta_rng = stream(seed, 2);
  const std::vector<double> eta = ar1(total, cfg.ecmwf_rho, eta_rng);

  double scale = cfg.ecmwf_noise;
  if (cfg.calibrate_ecmwf) {
    double lo = 0.0, hi = 5.0;
    const double at_lo = pair_stats(reanalysis(smooth, eta, cfg.ecmwf_bias, lo), u).rmse;
    const double at_hi = pair_stats(reanalysis(smooth, eta, cfg.ecmwf_bias, hi), u).rmse;
    if (!(at_lo <= cfg.target_rmse && at_hi >= cfg.target_rmse)) {
      throw CalibrationError("reanalysis RMSE target " + std::to_string(cfg.target_rmse) +
                             " is outside the reachable range [" + std::to_string(at_lo) + ", " +
                             std::to_string(at_hi) + "]");
    }
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (pair_stats(reanalysis(smooth, eta, cfg.ecmwf_bias, mid), u).rmse < cfg.target_rmse) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    scale = 0.5 * (lo + hi);
  }
  const std::vector<double> e = reanalysis(smooth, eta, cfg.ecmwf_bias, scale);
  if (cfg.calibrate_ecmwf) {
    const PairStats ps = pair_stats(e, u);
    if (!(ps.r2 >= cfg.r2_min && ps.r2 <= cfg.r2_max)) {
      throw CalibrationError("reanalysis R^2 " + std::to_string(ps.r2) + " outside [" + std::to_string(cfg.r2_min) +
                             ", " + std::to_string(cfg.r2_max) + "] at the calibrated noise level");
    }
  }

  // acoustic spectra
  std::array<double, kUpaBands> gain{}, offset{}, ship_weight{};
  for (std::size_t b = 0; b < kUpaBands; ++b) {
    const double bb = static_cast<double>(b);
    const double w2 = 2.0 * cfg.peak_width * cfg.peak_width;
    gain[b] = cfg.gain_base + cfg.gain_peak * (std::exp(-(bb - cfg.peak_band_low) * (bb - cfg.peak_band_low) / w2) +
                                               std::exp(-(bb - cfg.peak_band_high) * (bb - cfg.peak_band_high) / w2));
    offset[b] = 70.0 - 15.0 * std::log10(1.0 + bb);
    ship_weight[b] = std::exp(-bb / cfg.shipping_decay);
  }
  auto ship_rng = stream(seed, 3);
  const std::vector<double> shipping = ar1(n_hours, cfg.shipping_rho, ship_rng);
  auto band_rng = stream(seed, 4);
  std::normal_distribution<double> normal;

  std::vector<HourlyRecord> records(n_hours);
  for (std::size_t t = 0; t < n_hours; ++t) {
    HourlyRecord& r = records[t];
    r.hour = cfg.start_hour + static_cast<std::int64_t>(t);
    r.wind = u[t];
    r.ecmwf = e[t];
    std::array<double, kUpaBands> s{};
    const double level = std::log10(std::min(u[t], cfg.u_sat) + 0.5);
    for (std::size_t b = 0; b < kUpaBands; ++b) {
      s[b] = gain[b] * level + offset[b] + cfg.band_noise * normal(band_rng) +
             cfg.shipping_noise * ship_weight[b] * shipping[t];
    }
    r.upa = s;
  }
  if (stats) {
    const PairStats ps = pair_stats(e, u);
    stats->rmse = ps.rmse;
    stats->r2 = ps.r2;
    stats->max_wind = *std::max_element(u.begin(), u.end());
    stats->ecmwf_noise = scale;
  }
  return records;
}

SynthStats reanalysis_stats(std::span<const HourlyRecord> records) {
  std::vector<double> e, u;
  for (const HourlyRecord& r : records)
    if (r.ecmwf && r.wind) {
      e.push_back(*r.ecmwf);
      u.push_back(*r.wind);
    }
  if (u.empty()) throw InvalidArgument("no records hold both reanalysis and in-situ wind");
  const PairStats ps = pair_stats(e, u);
  return {ps.rmse, ps.r2, *std::max_element(u.begin(), u.end()), 0.0};
}

}  // namespace varwind::data
