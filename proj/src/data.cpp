#include "varwind/data.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "varwind/errors.hpp"
#include "varwind/log.hpp"

namespace varwind::data {

namespace {

constexpr std::size_t kCsvFields = 1 + kUpaBands + 2;

std::string csv_header() {
  std::string h = "iso_timestamp";
  char buf[16];
  for (std::size_t b = 0; b < kUpaBands; ++b) {
    std::snprintf(buf, sizeof(buf), ",upa_%03zu", b);
    h += buf;
  }
  return h + ",ecmwf,wind";
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::optional<double> parse_number(std::string_view field, std::size_t line_no) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
  if (field.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw IngestError("line " + std::to_string(line_no) + ": bad number '" + std::string(field) + "'");
  }
  return v;
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

int parse_int(std::string_view s, const std::string& text) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IngestError("bad timestamp '" + text + "'");
  return v;
}

}  // namespace

std::string format_hour(std::int64_t hour) {
  using namespace std::chrono;
  const std::int64_t day = hour >= 0 ? hour / 24 : -((-hour + 23) / 24);
  const auto hh = static_cast<int>(hour - day * 24);
  const year_month_day ymd{sys_days{days{day}}};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:00:00Z", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hh);
  return buf;
}

std::int64_t parse_hour(const std::string& text) {
  using namespace std::chrono;
  std::string_view s(text);
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  if (s.size() != 19 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' || s[16] != ':') {
    throw IngestError("bad timestamp '" + text + "'");
  }
  const int y = parse_int(s.substr(0, 4), text), mo = parse_int(s.substr(5, 2), text),
            d = parse_int(s.substr(8, 2), text), h = parse_int(s.substr(11, 2), text),
            mi = parse_int(s.substr(14, 2), text), se = parse_int(s.substr(17, 2), text);
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23) throw IngestError("bad timestamp '" + text + "'");
  if (mi != 0 || se != 0) throw IngestError("timestamp '" + text + "' is not on the hourly grid");
  return static_cast<std::int64_t>(sys_days{ymd}.time_since_epoch().count()) * 24 + h;
}

std::vector<HourlyRecord> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IngestError("empty dataset: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header()) throw IngestError("unexpected CSV header in " + path.string());

  std::vector<HourlyRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != kCsvFields) {
      throw IngestError("line " + std::to_string(line_no) + ": expected " + std::to_string(kCsvFields) +
                        " fields, got " + std::to_string(fields.size()));
    }
    HourlyRecord r;
    r.hour = parse_hour(std::string(fields[0]));
    std::array<double, kUpaBands> bands{};
    std::size_t present = 0;
    for (std::size_t b = 0; b < kUpaBands; ++b) {
      if (auto v = parse_number(fields[1 + b], line_no)) {
        bands[b] = *v;
        ++present;
      }
    }
    if (present == kUpaBands) {
      r.upa = bands;
    } else if (present != 0) {
      throw IngestError("line " + std::to_string(line_no) + ": acoustic spectrum is partially missing");
    }
    r.ecmwf = parse_number(fields[1 + kUpaBands], line_no);
    r.wind = parse_number(fields[2 + kUpaBands], line_no);
    if ((r.ecmwf && *r.ecmwf < 0.0) || (r.wind && *r.wind < 0.0)) {
      throw IngestError("line " + std::to_string(line_no) + ": negative wind speed");
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_csv(const std::filesystem::path& path, std::span<const HourlyRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset: " + path.string());
  std::string buf = csv_header() + "\n";
  for (const HourlyRecord& r : records) {
    buf += format_hour(r.hour);
    for (std::size_t b = 0; b < kUpaBands; ++b) {
      buf += ',';
      if (r.upa) append_number(buf, (*r.upa)[b]);
    }
    buf += ',';
    if (r.ecmwf) append_number(buf, *r.ecmwf);
    buf += ',';
    if (r.wind) append_number(buf, *r.wind);
    buf += '\n';
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
  out.flush();
  if (!out) throw IoError("failed writing dataset: " + path.string());
}

double Table::value(std::size_t row, std::size_t channel) const {
  if (channel < kUpaBands) return upa[row * kUpaBands + channel];
  if (channel == kEcmwfChannel) return ecmwf[row];
  return wind[row];
}

bool Table::present(std::size_t row, std::size_t channel) const {
  if (channel < kUpaBands) return upa_mask[row] != 0;
  if (channel == kEcmwfChannel) return ecmwf_mask[row] != 0;
  return true;
}

Table colocate(std::span<const HourlyRecord> records) {
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].hour == records[i - 1].hour) {
      throw IngestError("duplicate timestamp " + format_hour(records[i].hour));
    }
    if (records[i].hour < records[i - 1].hour) {
      throw IngestError("timestamps not sorted at " + format_hour(records[i].hour));
    }
  }
  auto day_of = [](std::int64_t hour) { return hour >= 0 ? hour / 24 : -((-hour + 23) / 24); };
  std::map<std::int64_t, std::size_t> wind_per_day;
  for (const HourlyRecord& r : records)
    if (r.wind) ++wind_per_day[day_of(r.hour)];

  Table t;
  for (const HourlyRecord& r : records) {
    if (!r.wind || wind_per_day[day_of(r.hour)] < 24) continue;
    t.hours.push_back(r.hour);
    t.wind.push_back(*r.wind);
    t.ecmwf.push_back(r.ecmwf.value_or(0.0));
    t.ecmwf_mask.push_back(r.ecmwf ? 1 : 0);
    t.upa_mask.push_back(r.upa ? 1 : 0);
    for (std::size_t b = 0; b < kUpaBands; ++b) t.upa.push_back(r.upa ? (*r.upa)[b] : 0.0);
  }
  return t;
}

std::vector<std::size_t> make_windows(const Table& table, RowRange rows, std::size_t window_len,
                                      std::size_t stride) {
  if (window_len == 0 || stride == 0) throw InvalidArgument("window length and stride must be >= 1");
  if (rows.end > table.size() || rows.begin > rows.end) throw InvalidArgument("row range outside the table");
  std::vector<std::size_t> starts;
  std::size_t block = rows.begin;
  while (block < rows.end) {
    std::size_t stop = block + 1;
    while (stop < rows.end && table.hours[stop] == table.hours[stop - 1] + 1) ++stop;
    const std::size_t n = stop - block;
    if (n < window_len) {
      log_warning("skipping " + std::to_string(n) + "-hour block starting " + format_hour(table.hours[block]) +
                  " (shorter than one window)");
    } else {
      for (std::size_t s = 0; s + window_len < n; s += stride) starts.push_back(block + s);
    }
    block = stop;
  }
  return starts;
}

Splits split_rows(const Table& table, std::size_t test_hours, std::size_t validation_hours) {
  Splits s;
  if (table.size() == 0) return s;
  const std::int64_t h0 = table.hours.front();
  auto first_at_or_after = [&](std::int64_t h) {
    return static_cast<std::size_t>(std::lower_bound(table.hours.begin(), table.hours.end(), h) - table.hours.begin());
  };
  const std::size_t a = first_at_or_after(h0 + static_cast<std::int64_t>(test_hours));
  const std::size_t b = first_at_or_after(h0 + static_cast<std::int64_t>(test_hours + validation_hours));
  s.test = {0, a};
  s.validation = {a, b};
  s.train = {b, table.size()};
  return s;
}

std::vector<std::size_t> sample_train_windows(const Table& table, RowRange rows, std::size_t count,
                                              std::uint64_t seed, std::size_t window_len) {
  const std::vector<std::size_t> candidates = make_windows(table, rows, window_len, 1);
  if (candidates.empty()) throw InvalidArgument("training region holds no complete window");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  std::vector<std::size_t> out(count);
  for (std::size_t& s : out) s = candidates[pick(rng)];
  return out;
}

Normalizer Normalizer::fit(const Table& table, RowRange rows) {
  Normalizer n;
  n.mean.assign(kFeatureChannels, 0.0);
  n.stddev.assign(kFeatureChannels, 0.0);
  for (std::size_t c = 0; c < kFeatureChannels; ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = rows.begin; r < rows.end; ++r)
      if (table.present(r, c)) {
        sum += table.value(r, c);
        ++count;
      }
    if (count < 2) throw InvalidArgument("channel " + std::to_string(c) + " has fewer than 2 training values");
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (std::size_t r = rows.begin; r < rows.end; ++r)
      if (table.present(r, c)) {
        const double d = table.value(r, c) - mean;
        sq += d * d;
      }
    const double sd = std::sqrt(sq / static_cast<double>(count));
    if (!(sd > 0.0)) throw InvalidArgument("channel " + std::to_string(c) + " has zero variance on the training rows");
    n.mean[c] = mean;
    n.stddev[c] = sd;
  }
  return n;
}

std::vector<std::size_t> state_channels(Modality modality) {
  std::vector<std::size_t> ch;
  for (std::size_t b = 0; b < kUpaBands; ++b) ch.push_back(b);
  if (modality == Modality::upa_ecmwf) ch.push_back(kEcmwfChannel);
  ch.push_back(kWindChannel);
  return ch;
}

WindowBatch gather_windows(const Table& table, const Normalizer& norm, Modality modality,
                           std::span<const std::size_t> starts, std::size_t window_len) {
  const std::vector<std::size_t> channels = state_channels(modality);
  const std::size_t B = starts.size(), C = channels.size(), T = window_len;
  std::vector<double> x(B * C * T, 0.0), avail(B * C * T, 0.0);
  std::vector<double> ecmwf(B * T, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t s = starts[b];
    if (s + T > table.size() || table.hours[s + T - 1] != table.hours[s] + static_cast<std::int64_t>(T) - 1) {
      throw InvalidArgument("window starting at row " + std::to_string(s) + " is not contiguous");
    }
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t row = s + t;
      if (table.ecmwf_mask[row]) ecmwf[b * T + t] = table.ecmwf[row];
      for (std::size_t k = 0; k < C; ++k) {
        const std::size_t ch = channels[k];
        if (!table.present(row, ch)) continue;
        const std::size_t i = (b * C + k) * T + t;
        x[i] = norm.normalize(ch, table.value(row, ch));
        avail[i] = 1.0;
      }
    }
  }
  WindowBatch out;
  out.x = Array({B, C, T}, std::move(x));
  out.avail = Array({B, C, T}, std::move(avail));
  out.ecmwf = Array({B, T}, std::move(ecmwf));
  out.starts.assign(starts.begin(), starts.end());
  return out;
}

void apply_missing_mask(WindowBatch& batch, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 0.9)) throw InvalidArgument("missing fraction must lie in [0, 0.9]");
  if (p == 0.0) return;
  const std::size_t B = batch.x.dim(0), C = batch.x.dim(1), T = batch.x.dim(2);
  std::vector<double> x = batch.x.to_vector(), avail = batch.avail.to_vector();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution drop(p);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      if (!drop(rng)) continue;
      for (std::size_t c = 0; c < kUpaBands; ++c) {
        const std::size_t i = (b * C + c) * T + t;
        x[i] = 0.0;
        avail[i] = 0.0;
      }
    }
  batch.x = Array(batch.x.shape(), std::move(x));
  batch.avail = Array(batch.avail.shape(), std::move(avail));
}

Array windows_to_rows(const Array& x) {
  const std::size_t B = x.dim(0), C = x.dim(1), T = x.dim(2);
  std::vector<double> rows(x.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < T; ++t) rows[(b * T + t) * C + c] = x[(b * C + c) * T + t];
  return Array({B * T, C}, std::move(rows));
}

Array rows_to_windows(const Array& rows, std::size_t batch, std::size_t steps) {
  if (rows.rank() != 2 || rows.dim(0) != batch * steps) {
    throw ShapeError("rows " + ad::to_string(rows.shape()) + " do not form " + std::to_string(batch) + " windows of " +
                     std::to_string(steps));
  }
  const std::size_t C = rows.dim(1);
  std::vector<double> x(rows.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < steps; ++t) x[(b * C + c) * steps + t] = rows[(b * steps + t) * C + c];
  return Array({batch, C, steps}, std::move(x));
}

}  // namespace varwind::data
