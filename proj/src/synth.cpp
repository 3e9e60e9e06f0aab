#include "windbench/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace windbench::synth {

namespace {

constexpr const char* kTimestampFormat = "%Y-%m-%d %H:%M";

std::int64_t default_start() { return data::parse_timestamp("2018-05-01 00:00", kTimestampFormat); }

std::string feature_name(std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "x%02zu", k + 1);
  return buf;
}

std::string timestamp_text(std::int64_t minutes) {
  std::string t = data::format_timestamp(minutes);
  t[10] = ' ';
  return t;
}

}  // namespace

double signal(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (x.size() < 5) throw Error(ErrorKind::InvalidArgument, "synthetic signal needs five features");
  return 2.5 * std::tanh(x(0)) + std::sin(1.2 * x(1)) + 0.3 * x(2) * x(2) + 0.6 * x(3) + 0.4 * x(3) * x(4);
}

data::Dataset generate_hourly(const SynthOptions& opts) {
  if (opts.features < 5) throw Error(ErrorKind::InvalidArgument, "synthetic data needs at least five features");
  if (opts.hours < 2) throw Error(ErrorKind::InvalidArgument, "synthetic data needs at least two hours");
  const auto n = static_cast<Eigen::Index>(opts.hours);
  const auto d = static_cast<Eigen::Index>(opts.features);
  Rng rng(mix_seed(opts.seed));

  data::Dataset ds;
  ds.X.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) ds.X(i, j) = rng.normal();

  Vector s(n);
  for (Eigen::Index i = 0; i < n; ++i) s(i) = signal(ds.X.row(i));
  const double sd = std::sqrt((s.array() - s.mean()).square().mean());
  ds.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) ds.y(i) = 8.0 + s(i) + opts.noise_ratio * sd * rng.normal();

  const std::int64_t start = opts.start_minute.value_or(default_start());
  for (std::size_t k = 0; k < opts.features; ++k) ds.feature_names.push_back(feature_name(k));
  ds.target_name = "wind_speed_80m";
  for (std::size_t i = 0; i < opts.hours; ++i) {
    ds.timestamps.push_back(start + 60 * static_cast<std::int64_t>(i));
    ds.row_ids.push_back(i);
  }
  return ds;
}

data::ColumnMapping synthetic_mapping(std::size_t features) {
  data::ColumnMapping m;
  m.target = "wind_speed_80m";
  m.target_name = "wind_speed_80m";
  for (std::size_t k = 0; k < features; ++k) m.features.push_back({feature_name(k), feature_name(k)});
  m.timestamp_columns = {"timestamp"};
  m.timestamp_format = kTimestampFormat;
  return m;
}

std::filesystem::path write_raw(const std::filesystem::path& dir, const SynthOptions& opts) {
  if (opts.samples_per_hour < 1 || opts.samples_per_hour > 60)
    throw Error(ErrorKind::InvalidArgument, "samples_per_hour must be in [1, 60]");
  const auto ds = generate_hourly(opts);
  std::filesystem::create_directories(dir);
  const auto path = dir / "raw.csv";
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());

  out << "timestamp,wind_speed_80m";
  for (const auto& f : ds.feature_names) out << "," << f;
  out << "\n";

  // Separate stream so the hourly values do not depend on the jitter settings.
  Rng jitter(mix_seed(opts.seed ^ 0x6a6974746572ULL));
  const std::size_t per = opts.samples_per_hour;
  const std::size_t cols = ds.cols() + 1;
  std::vector<double> offsets(per * cols);
  char buf[40];
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    // Offsets come in +/- pairs so each hour averages back to its value; an
    // odd trailing sample carries no offset.
    for (std::size_t c = 0; c < cols; ++c) {
      for (std::size_t k = 0; k + 1 < per; k += 2) {
        const double a = opts.jitter * jitter.normal();
        offsets[k * cols + c] = a;
        offsets[(k + 1) * cols + c] = -a;
      }
      if (per % 2 == 1) offsets[(per - 1) * cols + c] = 0.0;
    }
    for (std::size_t k = 0; k < per; ++k) {
      const std::int64_t minute = ds.timestamps[i] + static_cast<std::int64_t>(k * (60 / per));
      out << timestamp_text(minute);
      std::snprintf(buf, sizeof buf, ",%.17g", ds.y(static_cast<Eigen::Index>(i)) + offsets[k * cols]);
      out << buf;
      for (std::size_t c = 1; c < cols; ++c) {
        std::snprintf(buf, sizeof buf, ",%.17g",
                      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c - 1)) + offsets[k * cols + c]);
        out << buf;
      }
      out << "\n";
    }
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());

  std::ofstream mj(dir / "mapping.json");
  if (!mj) throw Error(ErrorKind::Io, "cannot write " + (dir / "mapping.json").string());
  mj << synthetic_mapping(opts.features).to_json().dump(2) << "\n";
  return path;
}

}  // namespace windbench::synth
