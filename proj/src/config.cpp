#include "varwind/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "varwind/errors.hpp"

namespace varwind::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  T v{};
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size()) {
    throw ConfigError("invalid value '" + text + "' for " + key);
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("invalid boolean '" + text + "' for " + key);
}

struct Field {
  std::string key;
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&)> set;
  bool hashed = true;
};

template <typename T, typename Access>
Field number(std::string key, Access access) {
  Field f;
  f.key = key;
  f.get = [access](const Config& c) {
    const T& v = access(c);
    if constexpr (std::is_floating_point_v<T>) {
      return format_double(v);
    } else {
      return std::to_string(v);
    }
  };
  f.set = [access, key](Config& c, const std::string& s) { access(c) = parse_number<T>(key, s); };
  return f;
}

template <typename Access>
Field flag(std::string key, Access access) {
  Field f;
  f.key = key;
  f.get = [access](const Config& c) { return std::string(access(c) ? "true" : "false"); };
  f.set = [access, key](Config& c, const std::string& s) { access(c) = parse_bool(key, s); };
  return f;
}

template <typename Access>
Field text(std::string key, Access access, bool hashed = true) {
  Field f;
  f.key = key;
  f.get = [access](const Config& c) { return access(c); };
  f.set = [access](Config& c, const std::string& s) { access(c) = trim(s); };
  f.hashed = hashed;
  return f;
}

#define VW_D(key, member) number<double>(key, [](auto& c) -> auto& { return c.member; })
#define VW_Z(key, member) number<std::size_t>(key, [](auto& c) -> auto& { return c.member; })
#define VW_U(key, member) number<std::uint64_t>(key, [](auto& c) -> auto& { return c.member; })
#define VW_B(key, member) flag(key, [](auto& c) -> auto& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f{
        text("data.path", [](auto& c) -> auto& { return c.data_path; }),
        VW_Z("data.synth_hours", synth_hours),
        VW_U("data.synth_seed", synth_seed),
        VW_Z("data.test_hours", train.test_hours),
        VW_Z("data.validation_hours", train.validation_hours),

        number<std::int64_t>("synth.start_hour", [](auto& c) -> auto& { return c.synth.start_hour; }),
        VW_D("synth.level", synth.level),
        VW_D("synth.diurnal_amplitude", synth.diurnal_amplitude),
        VW_D("synth.diurnal_phase", synth.diurnal_phase),
        VW_D("synth.ou_theta", synth.ou_theta),
        VW_D("synth.ou_sigma", synth.ou_sigma),
        VW_D("synth.u_sat", synth.u_sat),
        VW_D("synth.gain_base", synth.gain_base),
        VW_D("synth.gain_peak", synth.gain_peak),
        VW_D("synth.peak_band_low", synth.peak_band_low),
        VW_D("synth.peak_band_high", synth.peak_band_high),
        VW_D("synth.peak_width", synth.peak_width),
        VW_D("synth.band_noise", synth.band_noise),
        VW_D("synth.shipping_noise", synth.shipping_noise),
        VW_D("synth.shipping_rho", synth.shipping_rho),
        VW_D("synth.shipping_decay", synth.shipping_decay),
        VW_D("synth.ecmwf_bias", synth.ecmwf_bias),
        VW_D("synth.ecmwf_rho", synth.ecmwf_rho),
        VW_B("synth.calibrate_ecmwf", synth.calibrate_ecmwf),
        VW_D("synth.ecmwf_noise", synth.ecmwf_noise),
        VW_D("synth.target_rmse", synth.target_rmse),
        VW_D("synth.r2_min", synth.r2_min),
        VW_D("synth.r2_max", synth.r2_max),
        VW_Z("synth.calibration_hours", synth.calibration_hours),

        VW_D("assim.lambda1", train.assim.lambda1),
        VW_D("assim.lambda2", train.assim.lambda2),
        VW_B("assim.detach_inner_grad", train.assim.detach_inner_grad),
        VW_B("assim.normalize_grad", train.assim.normalize_grad),

        VW_Z("train.epochs", train.epochs),
        VW_Z("train.baseline_epochs", train.baseline_epochs),
        VW_Z("train.batch_size", train.batch_size),
        VW_Z("train.train_windows", train.train_windows),
        VW_Z("train.validation_stride", train.validation_stride),
        VW_Z("train.phase1_iters", train.phase1_iters),
        VW_Z("train.phase2_iters", train.phase2_iters),
        VW_D("train.lambda_d", train.loss.data),
        VW_D("train.lambda_p", train.loss.wind),
        VW_D("train.missing_frac", train.missing_frac),
        VW_U("train.mask_seed", train.mask_seed),

        VW_D("adam.prior_lr", train.adam_prior.learning_rate),
        VW_D("adam.prior_wd", train.adam_prior.weight_decay),
        VW_D("adam.solver_lr", train.adam_solver.learning_rate),
        VW_D("adam.solver_wd", train.adam_solver.weight_decay),
        VW_D("adam.fcae_lr", train.adam_fcae.learning_rate),
        VW_D("adam.fcae_wd", train.adam_fcae.weight_decay),

        VW_D("eval.baseline_pb", baseline_pb),

        text("output.root", [](auto& c) -> auto& { return c.output_root; }, false),
    };

    Field mode;
    mode.key = "assim.update_mode";
    mode.get = [](const Config& c) {
      return std::string(c.train.assim.update_mode == assim::UpdateMode::replace ? "replace" : "additive");
    };
    mode.set = [](Config& c, const std::string& s) {
      const std::string t = trim(s);
      if (t == "replace") {
        c.train.assim.update_mode = assim::UpdateMode::replace;
      } else if (t == "additive") {
        c.train.assim.update_mode = assim::UpdateMode::additive;
      } else {
        throw ConfigError("assim.update_mode must be 'replace' or 'additive', got '" + s + "'");
      }
    };
    f.push_back(mode);

    Field metric;
    metric.key = "train.val_metric";
    metric.get = [](const Config& c) {
      return std::string(c.train.val_metric == train::ValMetric::loss ? "loss" : "wind_rmse");
    };
    metric.set = [](Config& c, const std::string& s) {
      const std::string t = trim(s);
      if (t == "loss") {
        c.train.val_metric = train::ValMetric::loss;
      } else if (t == "wind_rmse") {
        c.train.val_metric = train::ValMetric::wind_rmse;
      } else {
        throw ConfigError("train.val_metric must be 'loss' or 'wind_rmse', got '" + s + "'");
      }
    };
    f.push_back(metric);

    Field seeds;
    seeds.key = "train.seeds";
    seeds.get = [](const Config& c) { return format_seeds(c.train.seeds); };
    seeds.set = [](Config& c, const std::string& s) { c.train.seeds = parse_seeds(s); };
    f.push_back(seeds);

    Field threads = VW_Z("train.threads", train.threads);
    threads.hashed = false;
    f.push_back(threads);

    // shared Adam moments for all optimizers
    for (auto [name, member] : {std::pair{"adam.beta1", &nn::AdamConfig::beta1}, std::pair{"adam.beta2", &nn::AdamConfig::beta2},
                                std::pair{"adam.epsilon", &nn::AdamConfig::epsilon}}) {
      Field a;
      a.key = name;
      a.get = [member](const Config& c) { return format_double(c.train.adam_prior.*member); };
      a.set = [member, key = std::string(name)](Config& c, const std::string& s) {
        const double v = parse_number<double>(key, s);
        c.train.adam_prior.*member = v;
        c.train.adam_solver.*member = v;
        c.train.adam_fcae.*member = v;
      };
      f.push_back(a);
    }
    std::stable_sort(f.begin(), f.end(), [](const Field& a, const Field& b) {
      return a.key.substr(0, a.key.find('.')) < b.key.substr(0, b.key.find('.'));
    });
    return f;
  }();
  return all;
}

#undef VW_D
#undef VW_Z
#undef VW_U
#undef VW_B

const Field& field(const std::string& key) {
  for (const Field& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown configuration key '" + key + "'");
}

}  // namespace

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  const std::string t = trim(text);
  std::vector<std::uint64_t> out;
  if (const auto dots = t.find(".."); dots != std::string::npos) {
    const auto lo = parse_number<std::uint64_t>("seeds", t.substr(0, dots));
    const auto hi = parse_number<std::uint64_t>("seeds", t.substr(dots + 2));
    if (hi < lo) throw ConfigError("empty seed range '" + text + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::uint64_t>("seeds", item));
  if (out.empty()) throw ConfigError("no seeds given");
  return out;
}

std::string format_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
  return s;
}

void Config::validate() const {
  try {
    train.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (data_path.empty() && synth_hours < 48) throw ConfigError("data.synth_hours must be >= 48");
  if (!(baseline_pb > 0.0)) throw ConfigError("eval.baseline_pb must be positive");
  if (output_root.empty()) throw ConfigError("output.root must not be empty");
}

std::vector<std::string> keys() {
  std::vector<std::string> k;
  for (const Field& f : fields()) k.push_back(f.key);
  return k;
}

std::string get(const Config& cfg, const std::string& key) { return field(key).get(cfg); }

void set(Config& cfg, const std::string& key, const std::string& value) { field(key).set(cfg, value); }

Config parse(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  Config cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' lies outside any section");
    for (const auto& [name, value] : body) set(cfg, section + "." + name, value.data());
  }
  cfg.validate();
  return cfg;
}

Config load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read configuration " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string to_ini(const Config& cfg) {
  std::ostringstream os;
  std::string section;
  for (const Field& f : fields()) {
    const std::string s = f.key.substr(0, f.key.find('.'));
    if (s != section) {
      os << (section.empty() ? "" : "\n") << '[' << s << "]\n";
      section = s;
    }
    os << f.key.substr(f.key.find('.') + 1) << " = " << f.get(cfg) << '\n';
  }
  return os.str();
}

std::string hash(const Config& cfg) {
  std::vector<std::string> lines;
  for (const Field& f : fields())
    if (f.hashed) lines.push_back(f.key + "=" + f.get(cfg));
  std::sort(lines.begin(), lines.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const std::string& line : lines)
    for (unsigned char c : line + "\n") {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace varwind::config
