#pragma once

// Meteorological data preparation: raw minute CSV -> hourly table -> complete
// dataset -> train/test split -> standardized features.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "windbench/common.hpp"

namespace windbench::data {

enum class Aggregation { Mean, CircularMean, Sum };

std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view s);

struct FeatureSource {
  std::string canonical;
  std::string source;
};

/// How raw export columns map onto the canonical predictors and the target.
struct ColumnMapping {
  std::string target;                          // source column holding the target
  std::string target_name = "wind_speed_80m";  // canonical target label
  std::vector<FeatureSource> features;         // ordered; defines dataset column order
  std::map<std::string, Aggregation> aggregation;  // by source column, default Mean
  std::vector<std::string> timestamp_columns;  // joined with a single space before parsing
  std::string timestamp_format = "%Y-%m-%d %H:%M";
  std::vector<double> missing_values;          // sentinels treated as missing (e.g. -99999)

  static ColumnMapping from_json(const nlohmann::ordered_json& j);
  static ColumnMapping load(const std::filesystem::path& path);
  [[nodiscard]] nlohmann::ordered_json to_json() const;

  /// Throws InvalidArgument when the target is absent or mapped twice, or a
  /// canonical feature name repeats.
  void validate() const;
  [[nodiscard]] Aggregation rule_for(const std::string& source) const;
  /// Target followed by feature sources, in mapping order.
  [[nodiscard]] std::vector<std::string> source_columns() const;
};

/// Parsed raw observations. Timestamps are minutes since 1970-01-01 00:00 (no
/// time-zone handling), strictly increasing. Missing cells are NaN.
struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::int64_t> minutes;
  std::vector<double> values;  // row-major rows() x columns.size()

  [[nodiscard]] std::size_t rows() const { return minutes.size(); }
  [[nodiscard]] double at(std::size_t row, std::size_t col) const {
    return values[row * columns.size() + col];
  }
  [[nodiscard]] std::size_t column_index(const std::string& name) const;
};

inline bool is_missing(double v) { return v != v; }

/// Parse a timestamp with a strftime-style pattern (%Y %m %d %H %M %S %%).
/// Returns minutes since the epoch; throws MalformedTimestamp.
std::int64_t parse_timestamp(std::string_view text, std::string_view format);
/// "YYYY-MM-DDTHH:MM"
std::string format_timestamp(std::int64_t minutes);

/// RFC-4180 record reader (quoted fields, doubled quotes, CRLF or LF).
std::vector<std::vector<std::string>> read_csv_records(std::istream& in);

RawTable parse_csv(std::istream& in, const ColumnMapping& mapping);
RawTable parse_csv(const std::filesystem::path& path, const ColumnMapping& mapping);

/// Circular mean of angles in degrees, in [0, 360).
double circular_mean_degrees(std::span<const double> degrees);

RawTable aggregate_hourly(const RawTable& raw, const ColumnMapping& mapping);

struct Dataset {
  Matrix X;
  Vector y;
  std::vector<std::string> feature_names;
  std::string target_name;
  std::vector<std::int64_t> timestamps;  // minutes; empty when unknown
  std::vector<std::size_t> row_ids;      // position in the chronological hourly table

  [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  [[nodiscard]] std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }
};

struct BuiltDataset {
  Dataset data;
  std::size_t dropped = 0;  // hourly rows with at least one missing cell
};

BuiltDataset build_dataset(const RawTable& hourly, const ColumnMapping& mapping);

enum class SplitMode { Random, Chronological };
std::string_view to_string(SplitMode m);
SplitMode parse_split_mode(std::string_view s);

struct Split {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_rows;  // indices into the input dataset
  std::vector<std::size_t> test_rows;
};

Dataset select_rows(const Dataset& ds, std::span<const std::size_t> rows);
Split split(const Dataset& ds, double ratio, std::uint64_t seed, SplitMode mode);

class Standardizer {
 public:
  /// Population (1/n) statistics. Constant columns get scale 1 and are listed
  /// in constant_columns().
  static Standardizer fit(const Matrix& X);

  [[nodiscard]] Matrix transform(const Matrix& X) const;
  [[nodiscard]] Matrix inverse_transform(const Matrix& Z) const;
  [[nodiscard]] Dataset apply(const Dataset& ds) const;

  [[nodiscard]] const Vector& mean() const { return mean_; }
  [[nodiscard]] const Vector& scale() const { return scale_; }
  [[nodiscard]] const std::vector<std::size_t>& constant_columns() const { return constant_; }

  [[nodiscard]] nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);

 private:
  Vector mean_;
  Vector scale_;
  std::vector<std::size_t> constant_;
};

Standardizer fit_standardizer(const Dataset& train);

/// Dataset CSV: row,timestamp,<features...>,<target>. Values round-trip exactly.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// Concatenate each row with its predecessors (in row_ids order within `ds`)
/// into a window of `window` consecutive samples, oldest first. The first rows
/// repeat the earliest available sample. window == 1 returns X unchanged.
Matrix lookback_windows(const Dataset& ds, std::size_t window);

}  // namespace windbench::data
