#pragma once

// Pyranometer records: CSV ingestion, cleaning, featurization, splitting and
// descriptive statistics.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "heliocast/error.hpp"
#include "heliocast/matrix.hpp"
#include "heliocast/random.hpp"
#include "heliocast/text.hpp"

namespace heliocast {

inline constexpr std::string_view kRecordCsvHeader = "timestamp,irradiance_wm2,temperature_k";

/// Local wall-clock time at the instrument site (America/Guayaquil, UTC-5,
/// no daylight saving). Stored without an offset.
struct Timestamp {
  int year = 1970;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;

  std::chrono::sys_days date() const {
    return std::chrono::sys_days{std::chrono::year{year} / month / day};
  }

  std::chrono::sys_seconds as_seconds() const {
    return date() + std::chrono::hours{hour} + std::chrono::minutes{minute} +
           std::chrono::seconds{second};
  }

  static Timestamp from_seconds(std::chrono::sys_seconds t) {
    using namespace std::chrono;
    const auto days_part = floor<days>(t);
    const year_month_day ymd{days_part};
    const hh_mm_ss hms{t - days_part};
    return Timestamp{int(ymd.year()),         int(unsigned(ymd.month())),
                     int(unsigned(ymd.day())), int(hms.hours().count()),
                     int(hms.minutes().count()), int(hms.seconds().count())};
  }

  /// Accepts `YYYY-MM-DDTHH:MM:SS` or `YYYY-MM-DDTHH:MM`.
  static bool parse(std::string_view text, Timestamp& out) {
    auto field = [&](std::size_t pos, std::size_t len, int& value) {
      if (pos + len > text.size()) return false;
      auto v = parse_int(text.substr(pos, len));
      if (!v) return false;
      for (std::size_t i = pos; i < pos + len; ++i)
        if (text[i] < '0' || text[i] > '9') return false;
      value = static_cast<int>(*v);
      return true;
    };
    if (text.size() != 16 && text.size() != 19) return false;
    if (text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':') return false;
    Timestamp t;
    if (!field(0, 4, t.year) || !field(5, 2, t.month) || !field(8, 2, t.day) ||
        !field(11, 2, t.hour) || !field(14, 2, t.minute))
      return false;
    if (text.size() == 19) {
      if (text[16] != ':' || !field(17, 2, t.second)) return false;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{t.year}, std::chrono::month(t.month),
                                          std::chrono::day(t.day)};
    if (!ymd.ok() || t.hour > 23 || t.minute > 59 || t.second > 59) return false;
    out = t;
    return true;
  }

  /// Calendar date only, `YYYY-MM-DD`.
  static bool parse_date(std::string_view text, Timestamp& out) {
    if (text.size() != 10) return false;
    return parse(std::string(text) + "T00:00", out);
  }

  std::string to_string() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", year, month, day, hour,
                  minute, second);
    return buf;
  }

  std::string date_string() const { return to_string().substr(0, 10); }

  bool same_day(const Timestamp& other) const {
    return year == other.year && month == other.month && day == other.day;
  }

  friend bool operator==(const Timestamp&, const Timestamp&) = default;
  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

/// One pyranometer observation.
struct Record {
  Timestamp timestamp;
  double irradiance = 0.0;   // W/m^2, may be slightly negative at night
  double temperature = 0.0;  // Kelvin

  friend bool operator==(const Record&, const Record&) = default;
};

enum class Season { wet, dry };

// Coastal Ecuador: wet season December through May.
inline Season season_of(int month) {
  return (month == 12 || month <= 5) ? Season::wet : Season::dry;
}

inline const char* to_string(Season s) { return s == Season::wet ? "wet" : "dry"; }

inline std::vector<Record> parse_records(std::istream& in) {
  std::vector<Record> records;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++line_no;
  if (trim(line) != kRecordCsvHeader)
    throw ParseError(1, "expected header '" + std::string(kRecordCsvHeader) + "'");

  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty()) continue;
    const auto fields = split_view(content, ',');
    if (fields.size() != 3)
      throw ParseError(line_no, "expected 3 fields, found " + std::to_string(fields.size()));
    Record r;
    if (!Timestamp::parse(trim(fields[0]), r.timestamp))
      throw ParseError(line_no, "unparseable timestamp '" + std::string(fields[0]) + "'");
    const auto irr = parse_double(trim(fields[1]));
    const auto temp = parse_double(trim(fields[2]));
    if (!irr) throw ParseError(line_no, "invalid irradiance '" + std::string(fields[1]) + "'");
    if (!temp) throw ParseError(line_no, "invalid temperature '" + std::string(fields[2]) + "'");
    if (!std::isfinite(*irr) || !std::isfinite(*temp))
      throw ParseError(line_no, "non-finite numeric value");
    if (*temp <= 0.0) throw ParseError(line_no, "temperature must be positive Kelvin");
    r.irradiance = *irr;
    r.temperature = *temp;
    records.push_back(r);
  }
  return records;
}

inline std::vector<Record> parse_records(std::string_view csv_text) {
  std::istringstream in{std::string(csv_text)};
  return parse_records(in);
}

inline void write_records(std::ostream& out, const std::vector<Record>& records) {
  out << kRecordCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.timestamp.to_string() << ',' << format_double(r.irradiance) << ','
        << format_double(r.temperature) << '\n';
  }
}

inline std::string serialize_records(const std::vector<Record>& records) {
  std::ostringstream out;
  write_records(out, records);
  return out.str();
}

/// Drops records with non-finite or non-physical fields; optionally clamps
/// negative irradiance to zero.
inline std::vector<Record> clean(const std::vector<Record>& records, bool clamp_negative = false) {
  std::vector<Record> out;
  out.reserve(records.size());
  for (auto r : records) {
    if (!std::isfinite(r.irradiance) || !std::isfinite(r.temperature) || r.temperature <= 0.0)
      continue;
    if (clamp_negative) r.irradiance = std::max(0.0, r.irradiance);
    out.push_back(r);
  }
  return out;
}

struct FeatureSpec {
  bool use_temperature = true;
  bool use_hour = true;
  bool use_month = false;
  int polynomial_degree = 1;

  void validate() const {
    require(use_temperature || use_hour || use_month, "feature spec selects no features");
    require(polynomial_degree >= 1, "polynomial degree must be >= 1");
  }

  std::size_t feature_count() const {
    return std::size_t(use_temperature) + std::size_t(use_hour) + std::size_t(use_month);
  }

  std::vector<std::string> feature_names() const {
    std::vector<std::string> names;
    if (use_temperature) names.emplace_back("temperature");
    if (use_hour) names.emplace_back("hour");
    if (use_month) names.emplace_back("month");
    return names;
  }

  /// Comma-separated feature list, e.g. "temperature,hour".
  std::string to_string() const {
    std::string out;
    for (const auto& n : feature_names()) out += (out.empty() ? "" : ",") + n;
    return out;
  }

  static FeatureSpec from_string(std::string_view list, int degree = 1) {
    FeatureSpec spec{false, false, false, degree};
    for (auto name : split_view(list, ',')) {
      name = trim(name);
      if (name == "temperature") spec.use_temperature = true;
      else if (name == "hour") spec.use_hour = true;
      else if (name == "month") spec.use_month = true;
      else fail(ErrorCode::invalid_argument, "unknown feature '" + std::string(name) + "'");
    }
    spec.validate();
    return spec;
  }

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

/// Feature row in the fixed order [temperature, hour, month], filtered by the spec.
inline std::vector<double> feature_row(const Timestamp& ts, double temperature,
                                       const FeatureSpec& spec) {
  std::vector<double> row;
  row.reserve(3);
  if (spec.use_temperature) row.push_back(temperature);
  if (spec.use_hour) row.push_back(static_cast<double>(ts.hour));
  if (spec.use_month) row.push_back(static_cast<double>(ts.month));
  return row;
}

struct Dataset {
  Matrix features;
  std::vector<double> target;
  std::vector<std::string> feature_names;

  std::size_t size() const noexcept { return target.size(); }
  std::size_t dims() const noexcept { return features.cols(); }

  void validate() const {
    require(features.rows() == target.size(), "feature rows and target length differ");
    require(features.cols() >= 1, "dataset needs at least one feature");
    require(feature_names.size() == features.cols(), "feature name count mismatch");
    for (double v : features.data()) require(std::isfinite(v), "non-finite feature value");
    for (double v : target) require(std::isfinite(v), "non-finite target value");
  }

  Dataset subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.feature_names = feature_names;
    out.features = Matrix(rows.size(), dims());
    out.target.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto src = features.row(rows[i]);
      std::copy(src.begin(), src.end(), out.features.row(i).begin());
      out.target.push_back(target[rows[i]]);
    }
    return out;
  }

  /// Content hash over names, features and target in shortest-decimal form.
  std::string fingerprint() const {
    Fnv1a h;
    for (const auto& n : feature_names) {
      h.update(n);
      h.update(",");
    }
    for (std::size_t i = 0; i < size(); ++i) {
      for (double v : features.row(i)) {
        h.update(format_double(v));
        h.update(",");
      }
      h.update(format_double(target[i]));
      h.update("\n");
    }
    return h.hex();
  }
};

inline Dataset extract_features(const std::vector<Record>& records, const FeatureSpec& spec) {
  spec.validate();
  require(!records.empty(), "cannot extract features from an empty record list");
  Dataset ds;
  ds.feature_names = spec.feature_names();
  ds.features = Matrix(records.size(), spec.feature_count());
  ds.target.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto row = feature_row(records[i].timestamp, records[i].temperature, spec);
    std::copy(row.begin(), row.end(), ds.features.row(i).begin());
    ds.target.push_back(records[i].irradiance);
  }
  return ds;
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded random partition of [0, n). The train side takes
/// ceil(train_fraction * n) indices, kept within [1, n - 1] so both sides are
/// non-empty.
inline SplitIndices split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must lie in (0, 1)");
  require(n >= 2, "split needs at least two rows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  // The epsilon keeps products such as 0.7 * 10 = 7.000000000000001 from rounding up.
  auto train_count = static_cast<std::size_t>(std::ceil(train_fraction * double(n) - 1e-9));
  train_count = std::clamp<std::size_t>(train_count, 1, n - 1);
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());
  return out;
}

inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction = 0.8,
                                         std::uint64_t seed = 42) {
  const auto idx = split_indices(ds.size(), train_fraction, seed);
  return {ds.subset(idx.train), ds.subset(idx.test)};
}

struct ColumnSummary {
  std::string name;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

struct SummaryTable {
  std::vector<ColumnSummary> columns;  // Month, Hour, Irradiance, Temperature
  std::size_t wet_season_count = 0;
  std::size_t dry_season_count = 0;
};

/// Quantile of sorted data by linear interpolation between order statistics.
inline double interpolated_quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * double(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

inline ColumnSummary summarize_column(std::string name, std::vector<double> values) {
  require(!values.empty(), "cannot summarize an empty column");
  ColumnSummary s;
  s.name = std::move(name);
  s.count = values.size();
  const double n = double(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  s.q25 = interpolated_quantile(values, 0.25);
  s.median = interpolated_quantile(values, 0.5);
  s.q75 = interpolated_quantile(values, 0.75);
  return s;
}

inline SummaryTable summarize(const std::vector<Record>& records) {
  require(!records.empty(), "cannot summarize an empty record list");
  std::array<std::vector<double>, 4> cols;
  SummaryTable table;
  for (const auto& r : records) {
    cols[0].push_back(double(r.timestamp.month));
    cols[1].push_back(double(r.timestamp.hour));
    cols[2].push_back(r.irradiance);
    cols[3].push_back(r.temperature);
    if (season_of(r.timestamp.month) == Season::wet) ++table.wet_season_count;
    else ++table.dry_season_count;
  }
  const std::array<const char*, 4> names{"Month", "Hour", "Irradiance", "Temperature"};
  for (std::size_t c = 0; c < 4; ++c)
    table.columns.push_back(summarize_column(names[c], std::move(cols[c])));
  return table;
}

/// Rows count/mean/std/min/25%/50%/75%/max against the four columns.
inline std::string format_summary(const SummaryTable& table) {
  std::ostringstream out;
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };
  out << pad("", 6);
  for (const auto& c : table.columns) out << pad(c.name, 14);
  out << '\n';
  auto emit = [&](const char* label, auto getter, int digits) {
    out << std::string(label) << std::string(6 - std::string(label).size(), ' ');
    for (const auto& c : table.columns) out << pad(format_fixed(getter(c), digits), 14);
    out << '\n';
  };
  emit("count", [](const ColumnSummary& c) { return double(c.count); }, 0);
  emit("mean", [](const ColumnSummary& c) { return c.mean; }, 2);
  emit("std", [](const ColumnSummary& c) { return c.std; }, 2);
  emit("min", [](const ColumnSummary& c) { return c.min; }, 2);
  emit("25%", [](const ColumnSummary& c) { return c.q25; }, 2);
  emit("50%", [](const ColumnSummary& c) { return c.median; }, 2);
  emit("75%", [](const ColumnSummary& c) { return c.q75; }, 2);
  emit("max", [](const ColumnSummary& c) { return c.max; }, 2);
  out << "season wet=" << table.wet_season_count << " dry=" << table.dry_season_count << '\n';
  return out.str();
}

}  // namespace heliocast
