#include "windbench/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

namespace windbench::data {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc{} || ptr != end) return false;
  return std::isfinite(out);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::Mean: return "mean";
    case Aggregation::CircularMean: return "circular_mean";
    case Aggregation::Sum: return "sum";
  }
  return "mean";
}

Aggregation parse_aggregation(std::string_view s) {
  if (s == "mean") return Aggregation::Mean;
  if (s == "circular_mean") return Aggregation::CircularMean;
  if (s == "sum") return Aggregation::Sum;
  throw Error(ErrorKind::Format, "unknown aggregation rule '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// ColumnMapping

ColumnMapping ColumnMapping::from_json(const nlohmann::ordered_json& j) {
  ColumnMapping m;
  try {
    const auto& t = j.at("target");
    if (t.is_string()) {
      m.target = t.get<std::string>();
    } else {
      m.target = t.at("source").get<std::string>();
      m.target_name = t.value("name", m.target_name);
    }
    if (j.contains("target_name")) m.target_name = j["target_name"].get<std::string>();
    for (const auto& [canonical, source] : j.at("features").items()) {
      m.features.push_back({canonical, source.get<std::string>()});
    }
    if (j.contains("aggregation")) {
      for (const auto& [source, rule] : j["aggregation"].items()) {
        m.aggregation[source] = parse_aggregation(rule.get<std::string>());
      }
    }
    const auto& ts = j.at("timestamp");
    const auto& col = ts.at("column");
    if (col.is_array()) {
      m.timestamp_columns = col.get<std::vector<std::string>>();
    } else {
      m.timestamp_columns = {col.get<std::string>()};
    }
    m.timestamp_format = ts.value("format", m.timestamp_format);
    if (j.contains("missing_values")) m.missing_values = j["missing_values"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("column mapping: ") + e.what());
  }
  m.validate();
  return m;
}

ColumnMapping ColumnMapping::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open mapping file " + path.string());
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::ordered_json ColumnMapping::to_json() const {
  nlohmann::ordered_json j;
  j["target"] = {{"source", target}, {"name", target_name}};
  j["features"] = nlohmann::ordered_json::object();
  for (const auto& f : features) j["features"][f.canonical] = f.source;
  j["aggregation"] = nlohmann::ordered_json::object();
  for (const auto& [src, rule] : aggregation) j["aggregation"][src] = to_string(rule);
  j["timestamp"] = {{"column", timestamp_columns}, {"format", timestamp_format}};
  j["missing_values"] = missing_values;
  return j;
}

void ColumnMapping::validate() const {
  if (target.empty()) throw Error(ErrorKind::InvalidArgument, "mapping has no target column");
  if (features.empty()) throw Error(ErrorKind::InvalidArgument, "mapping has no features");
  if (timestamp_columns.empty()) throw Error(ErrorKind::InvalidArgument, "mapping has no timestamp column");
  std::set<std::string> names;
  for (const auto& f : features) {
    if (f.source == target) {
      throw Error(ErrorKind::InvalidArgument, "target column '" + target + "' is also mapped as feature '" +
                                                  f.canonical + "'");
    }
    if (!names.insert(f.canonical).second) {
      throw Error(ErrorKind::InvalidArgument, "canonical feature '" + f.canonical + "' mapped twice");
    }
  }
}

Aggregation ColumnMapping::rule_for(const std::string& source) const {
  const auto it = aggregation.find(source);
  return it == aggregation.end() ? Aggregation::Mean : it->second;
}

std::vector<std::string> ColumnMapping::source_columns() const {
  std::vector<std::string> cols{target};
  for (const auto& f : features) cols.push_back(f.source);
  return cols;
}

std::size_t RawTable::column_index(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw Error(ErrorKind::MissingColumn, name);
  return static_cast<std::size_t>(it - columns.begin());
}

// ---------------------------------------------------------------------------
// timestamps

std::int64_t parse_timestamp(std::string_view text, std::string_view format) {
  int year = 1970, month = 1, day = 1, hour = 0, minute = 0, second = 0;
  std::size_t pos = 0;
  auto fail = [&]() -> Error {
    return Error(ErrorKind::MalformedTimestamp,
                 "'" + std::string(text) + "' does not match '" + std::string(format) + "'");
  };
  auto read_int = [&](std::size_t max_digits) {
    std::size_t start = pos;
    int v = 0;
    while (pos < text.size() && pos - start < max_digits && text[pos] >= '0' && text[pos] <= '9') {
      v = v * 10 + (text[pos] - '0');
      ++pos;
    }
    if (pos == start) throw fail();
    return v;
  };
  text = trim(text);
  for (std::size_t i = 0; i < format.size(); ++i) {
    const char ch = format[i];
    if (ch == '%' && i + 1 < format.size()) {
      switch (format[++i]) {
        case 'Y': year = read_int(4); break;
        case 'm': month = read_int(2); break;
        case 'd': day = read_int(2); break;
        case 'H': hour = read_int(2); break;
        case 'M': minute = read_int(2); break;
        case 'S': second = read_int(2); break;
        case '%':
          if (pos >= text.size() || text[pos] != '%') throw fail();
          ++pos;
          break;
        default: throw fail();
      }
    } else {
      if (pos >= text.size() || text[pos] != ch) throw fail();
      ++pos;
    }
  }
  if (pos != text.size()) throw fail();
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) throw fail();
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 1440 + hour * 60 + minute;
}

std::string format_timestamp(std::int64_t minutes) {
  using namespace std::chrono;
  const std::int64_t days = floor_div(minutes, 1440);
  const std::int64_t rem = minutes - days * 1440;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 60), static_cast<int>(rem % 60));
  return buf;
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char c;
  auto end_record = [&]() {
    if (field_started || !record.empty()) {
      record.push_back(std::move(field));
      records.push_back(std::move(record));
    }
    record.clear();
    field.clear();
    field_started = false;
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        if (in.peek() == '\n') in.get(c);
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorKind::Format, "unterminated quoted CSV field");
  end_record();
  // strip a UTF-8 byte order mark from the first cell
  if (!records.empty() && !records[0].empty() && records[0][0].rfind("\xEF\xBB\xBF", 0) == 0) {
    records[0][0].erase(0, 3);
  }
  return records;
}

RawTable parse_csv(std::istream& in, const ColumnMapping& mapping) {
  mapping.validate();
  auto records = read_csv_records(in);
  if (records.empty()) throw Error(ErrorKind::EmptyFile, "no header row");
  const auto& header = records.front();
  auto find_col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    throw Error(ErrorKind::MissingColumn, name);
  };
  std::vector<std::size_t> ts_idx;
  for (const auto& c : mapping.timestamp_columns) ts_idx.push_back(find_col(c));
  RawTable table;
  table.columns = mapping.source_columns();
  std::vector<std::size_t> val_idx;
  for (const auto& c : table.columns) val_idx.push_back(find_col(c));
  if (records.size() == 1) throw Error(ErrorKind::EmptyFile, "header but no data rows");

  const std::size_t ncol = table.columns.size();
  struct Row {
    std::int64_t minute;
    std::size_t line;
    std::vector<double> v;
  };
  std::vector<Row> rows;
  rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && trim(rec[0]).empty()) continue;  // blank line
    std::string stamp;
    for (std::size_t k = 0; k < ts_idx.size(); ++k) {
      if (ts_idx[k] >= rec.size()) {
        throw Error(ErrorKind::MalformedTimestamp, "row " + std::to_string(r) + ": missing timestamp cell");
      }
      if (k) stamp.push_back(' ');
      stamp += trim(rec[ts_idx[k]]);
    }
    Row row;
    try {
      row.minute = parse_timestamp(stamp, mapping.timestamp_format);
    } catch (const Error& e) {
      throw Error(ErrorKind::MalformedTimestamp, "row " + std::to_string(r) + ": " + e.what());
    }
    row.line = r;
    row.v.resize(ncol);
    for (std::size_t c = 0; c < ncol; ++c) {
      double v = std::numeric_limits<double>::quiet_NaN();
      if (val_idx[c] < rec.size()) {
        double parsed;
        if (parse_double(rec[val_idx[c]], parsed) &&
            std::find(mapping.missing_values.begin(), mapping.missing_values.end(), parsed) ==
                mapping.missing_values.end()) {
          v = parsed;
        }
      }
      row.v[c] = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorKind::EmptyFile, "no data rows");
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.minute < b.minute; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].minute == rows[i - 1].minute) {
      throw Error(ErrorKind::MalformedTimestamp,
                  "row " + std::to_string(rows[i].line) + ": duplicate timestamp " + format_timestamp(rows[i].minute));
    }
  }
  table.minutes.reserve(rows.size());
  table.values.reserve(rows.size() * ncol);
  for (const auto& row : rows) {
    table.minutes.push_back(row.minute);
    table.values.insert(table.values.end(), row.v.begin(), row.v.end());
  }
  return table;
}

RawTable parse_csv(const std::filesystem::path& path, const ColumnMapping& mapping) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return parse_csv(in, mapping);
}

// ---------------------------------------------------------------------------
// hourly aggregation

double circular_mean_degrees(std::span<const double> degrees) {
  constexpr double rad = std::numbers::pi / 180.0;
  double s = 0.0, c = 0.0;
  for (double d : degrees) {
    s += std::sin(d * rad);
    c += std::cos(d * rad);
  }
  const double n = static_cast<double>(degrees.size());
  double deg = std::atan2(s / n, c / n) / rad;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

RawTable aggregate_hourly(const RawTable& raw, const ColumnMapping& mapping) {
  if (raw.rows() == 0) throw Error(ErrorKind::EmptyInput, "no rows to aggregate");
  const std::size_t ncol = raw.columns.size();
  std::vector<Aggregation> rules;
  for (const auto& c : raw.columns) rules.push_back(mapping.rule_for(c));

  RawTable out;
  out.columns = raw.columns;
  std::vector<double> bucket;
  std::size_t start = 0;
  while (start < raw.rows()) {
    const std::int64_t hour = floor_div(raw.minutes[start], 60);
    std::size_t end = start;
    while (end < raw.rows() && floor_div(raw.minutes[end], 60) == hour) ++end;
    out.minutes.push_back(hour * 60);
    for (std::size_t c = 0; c < ncol; ++c) {
      bucket.clear();
      for (std::size_t r = start; r < end; ++r) {
        const double v = raw.at(r, c);
        if (!is_missing(v)) bucket.push_back(v);
      }
      double v = std::numeric_limits<double>::quiet_NaN();
      if (!bucket.empty()) {
        switch (rules[c]) {
          case Aggregation::Mean:
            v = std::accumulate(bucket.begin(), bucket.end(), 0.0) / static_cast<double>(bucket.size());
            break;
          case Aggregation::Sum:
            v = std::accumulate(bucket.begin(), bucket.end(), 0.0);
            break;
          case Aggregation::CircularMean:
            v = circular_mean_degrees(bucket);
            break;
        }
      }
      out.values.push_back(v);
    }
    start = end;
  }
  return out;
}

// ---------------------------------------------------------------------------
// dataset

BuiltDataset build_dataset(const RawTable& hourly, const ColumnMapping& mapping) {
  mapping.validate();
  const std::size_t tcol = hourly.column_index(mapping.target);
  std::vector<std::size_t> fcols;
  for (const auto& f : mapping.features) fcols.push_back(hourly.column_index(f.source));

  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < hourly.rows(); ++r) {
    bool complete = !is_missing(hourly.at(r, tcol));
    for (std::size_t c : fcols) complete = complete && !is_missing(hourly.at(r, c));
    if (complete) keep.push_back(r);
  }
  if (keep.empty()) throw Error(ErrorKind::NoCompleteRows, "every hourly row has a missing cell");

  BuiltDataset built;
  built.dropped = hourly.rows() - keep.size();
  Dataset& ds = built.data;
  ds.X.resize(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(fcols.size()));
  ds.y.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto r = keep[i];
    for (std::size_t j = 0; j < fcols.size(); ++j) {
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = hourly.at(r, fcols[j]);
    }
    ds.y(static_cast<Eigen::Index>(i)) = hourly.at(r, tcol);
    ds.timestamps.push_back(hourly.minutes[r]);
    ds.row_ids.push_back(i);
  }
  for (const auto& f : mapping.features) ds.feature_names.push_back(f.canonical);
  ds.target_name = mapping.target_name;
  return built;
}

std::string_view to_string(SplitMode m) {
  return m == SplitMode::Random ? "random" : "chronological";
}

SplitMode parse_split_mode(std::string_view s) {
  if (s == "random") return SplitMode::Random;
  if (s == "chronological") return SplitMode::Chronological;
  throw Error(ErrorKind::Usage, "unknown split mode '" + std::string(s) + "'");
}

Dataset select_rows(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out;
  out.feature_names = ds.feature_names;
  out.target_name = ds.target_name;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), ds.X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.X.row(static_cast<Eigen::Index>(i)) = ds.X.row(r);
    out.y(static_cast<Eigen::Index>(i)) = ds.y(r);
    if (!ds.timestamps.empty()) out.timestamps.push_back(ds.timestamps[rows[i]]);
    out.row_ids.push_back(ds.row_ids.empty() ? rows[i] : ds.row_ids[rows[i]]);
  }
  return out;
}

Split split(const Dataset& ds, double ratio, std::uint64_t seed, SplitMode mode) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "split ratio must lie in (0, 1)");
  }
  const std::size_t n = ds.rows();
  if (n < 2) throw Error(ErrorKind::DegenerateSplit, "need at least 2 rows to split");
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw Error(ErrorKind::DegenerateSplit, "ratio " + std::to_string(ratio) + " leaves one side empty for n=" +
                                                std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (mode == SplitMode::Random) {
    Rng rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
  }
  Split s;
  s.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  s.train = select_rows(ds, s.train_rows);
  s.test = select_rows(ds, s.test_rows);
  return s;
}

// ---------------------------------------------------------------------------
// standardization

Standardizer Standardizer::fit(const Matrix& X) {
  Standardizer s;
  const double n = static_cast<double>(X.rows());
  s.mean_ = X.colwise().mean().transpose();
  s.scale_.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.mean_(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    if (sd > 0.0 && std::isfinite(sd)) {
      s.scale_(j) = sd;
    } else {
      s.scale_(j) = 1.0;
      s.constant_.push_back(static_cast<std::size_t>(j));
    }
  }
  return s;
}

Matrix Standardizer::transform(const Matrix& X) const {
  if (X.cols() != mean_.size()) throw Error(ErrorKind::ShapeMismatch, "standardizer column count");
  return (X.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array();
}

Matrix Standardizer::inverse_transform(const Matrix& Z) const {
  if (Z.cols() != mean_.size()) throw Error(ErrorKind::ShapeMismatch, "standardizer column count");
  Matrix X = Z.array().rowwise() * scale_.transpose().array();
  X.rowwise() += mean_.transpose();
  return X;
}

Dataset Standardizer::apply(const Dataset& ds) const {
  Dataset out = ds;
  out.X = transform(ds.X);
  return out;
}

nlohmann::json Standardizer::to_json() const {
  return {{"mean", std::vector<double>(mean_.data(), mean_.data() + mean_.size())},
          {"scale", std::vector<double>(scale_.data(), scale_.data() + scale_.size())},
          {"constant_columns", constant_}};
}

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  Standardizer s;
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto scale = j.at("scale").get<std::vector<double>>();
  if (mean.size() != scale.size()) throw Error(ErrorKind::Format, "standardizer mean/scale length");
  s.mean_ = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  s.scale_ = Eigen::Map<const Vector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  s.constant_ = j.value("constant_columns", std::vector<std::size_t>{});
  return s;
}

Standardizer fit_standardizer(const Dataset& train) {
  if (train.rows() < 2) throw Error(ErrorKind::InvalidArgument, "standardizer needs at least 2 training rows");
  return Standardizer::fit(train.X);
}

// ---------------------------------------------------------------------------
// persistence

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "row,timestamp";
  for (const auto& f : ds.feature_names) out << ',' << f;
  out << ',' << ds.target_name << '\n';
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    out << (ds.row_ids.empty() ? i : ds.row_ids[i]) << ',';
    if (!ds.timestamps.empty()) out << format_timestamp(ds.timestamps[i]);
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) out << ',' << format_double(ds.X(static_cast<Eigen::Index>(i), j));
    out << ',' << format_double(ds.y(static_cast<Eigen::Index>(i))) << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  const auto records = read_csv_records(in);
  if (records.empty()) throw Error(ErrorKind::EmptyFile, path.string());
  const auto& header = records.front();
  if (header.size() < 4 || header[0] != "row" || header[1] != "timestamp") {
    throw Error(ErrorKind::Format, path.string() + ": not a prepared dataset file");
  }
  Dataset ds;
  const std::size_t d = header.size() - 3;
  ds.feature_names.assign(header.begin() + 2, header.end() - 1);
  ds.target_name = header.back();
  const std::size_t n = records.size() - 1;
  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ds.y.resize(static_cast<Eigen::Index>(n));
  bool have_ts = true;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = records[i + 1];
    if (rec.size() != header.size()) {
      throw Error(ErrorKind::Format, path.string() + ": row " + std::to_string(i + 1) + " has wrong width");
    }
    std::size_t row_id = 0;
    const auto [p, ec] = std::from_chars(rec[0].data(), rec[0].data() + rec[0].size(), row_id);
    if (ec != std::errc{}) throw Error(ErrorKind::Format, path.string() + ": bad row id");
    ds.row_ids.push_back(row_id);
    if (rec[1].empty()) {
      have_ts = false;
    } else {
      ds.timestamps.push_back(parse_timestamp(rec[1], "%Y-%m-%dT%H:%M"));
    }
    for (std::size_t j = 0; j <= d; ++j) {
      double v;
      if (!parse_double(rec[j + 2], v)) {
        throw Error(ErrorKind::Format, path.string() + ": non-numeric cell in row " + std::to_string(i + 1));
      }
      if (j < d) {
        ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      } else {
        ds.y(static_cast<Eigen::Index>(i)) = v;
      }
    }
  }
  if (!have_ts) ds.timestamps.clear();
  return ds;
}

Matrix lookback_windows(const Dataset& ds, std::size_t window) {
  if (window == 0) throw Error(ErrorKind::InvalidArgument, "lookback window must be >= 1");
  if (window == 1) return ds.X;
  const std::size_t n = ds.rows();
  const auto d = ds.X.cols();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!ds.row_ids.empty()) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ds.row_ids[a] < ds.row_ids[b]; });
  }
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(window) * d);
  for (std::size_t pos = 0; pos < n; ++pos) {
    const auto row = static_cast<Eigen::Index>(order[pos]);
    for (std::size_t k = 0; k < window; ++k) {
      // slot k holds the sample (window-1-k) steps back
      const std::size_t back = window - 1 - k;
      const std::size_t src_pos = pos >= back ? pos - back : 0;
      out.block(row, static_cast<Eigen::Index>(k) * d, 1, d) = ds.X.row(static_cast<Eigen::Index>(order[src_pos]));
    }
  }
  return out;
}

}  // namespace windbench::data
