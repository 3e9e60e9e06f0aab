#pragma once

// Run configuration: built-in profiles, JSON config files and flag overrides.
//
// Resolution order: defaults <- profile <- config file <- command-line flags.
// Objects merge key by key; any other value replaces the earlier one.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "windbench/data.hpp"

namespace windbench::config {

struct RunConfig {
  std::string profile = "synthetic";

  // Data source: either a raw export plus mapping, or the built-in generator.
  bool synthetic = true;
  std::filesystem::path raw_csv;
  std::filesystem::path mapping;
  std::size_t synthetic_hours = 2208;
  std::uint64_t synthetic_seed = 2018;

  double split_ratio = 0.8;
  std::uint64_t split_seed = 42;
  data::SplitMode split_mode = data::SplitMode::Random;

  std::uint64_t seed = 42;
  std::vector<std::string> models;                    // ids in report order
  std::map<std::string, nlohmann::json> hyperparams;  // by model id, seeds filled in
  std::filesystem::path output = "run";
  unsigned jobs = 1;

  // Checks applied by the reproduce command.
  std::map<std::string, double> min_r2;  // by model id
  double max_seconds = 0.0;              // 0 disables the time budget

  [[nodiscard]] nlohmann::json to_json() const;
  /// Canonical form hashed into reports: to_json() without the output path.
  [[nodiscard]] std::string hash() const;
};

/// Names of the built-in profiles.
std::vector<std::string> profile_names();
/// Patch for a built-in profile; throws Usage for unknown names.
nlohmann::json profile_patch(const std::string& name);
/// Complete default document (every model block included).
nlohmann::json defaults();

/// Recursive merge: objects merge key by key, anything else replaces.
void merge(nlohmann::json& target, const nlohmann::json& patch);

/// Turns a fully merged document into a RunConfig. Relative paths resolve
/// against `base_dir`. Per-model seeds default to a value derived from `seed`
/// and the model's position.
RunConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

struct Overrides {
  std::optional<std::filesystem::path> config_file;
  std::optional<std::string> profile;
  std::optional<std::vector<std::string>> models;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output;
  std::optional<unsigned> jobs;
};

RunConfig resolve(const Overrides& o);

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace windbench::config
