#pragma once

// Seeded synthetic stand-in for the meteorological export: 17 independent
// standard-normal predictors and a target that depends smoothly on five of them.

#include <cstdint>
#include <filesystem>
#include <optional>

#include "windbench/data.hpp"

namespace windbench::synth {

struct SynthOptions {
  std::size_t hours = 2208;  // 2018-05-01 00:00 through 2018-07-31 23:00
  std::size_t features = 17;
  std::size_t samples_per_hour = 4;
  double noise_ratio = 0.1;  // noise sd as a fraction of the signal sd
  double jitter = 0.05;      // sd of the symmetric within-hour jitter
  std::uint64_t seed = 2018;
  std::optional<std::int64_t> start_minute;  // default 2018-05-01 00:00
};

/// Noise-free target for one feature row (needs at least five features).
double signal(const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// The hourly dataset the raw export aggregates back to.
data::Dataset generate_hourly(const SynthOptions& opts);

/// Mapping describing the raw file written by write_raw().
data::ColumnMapping synthetic_mapping(std::size_t features = 17);

/// Writes `samples_per_hour` rows per hour whose per-hour means reproduce
/// generate_hourly() (jitter is applied in +/- pairs), plus mapping.json.
/// Returns the path of the raw CSV.
std::filesystem::path write_raw(const std::filesystem::path& dir, const SynthOptions& opts);

}  // namespace windbench::synth
