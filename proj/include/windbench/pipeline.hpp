#pragma once

// prepare -> train -> evaluate orchestration behind the command-line verbs.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "windbench/config.hpp"
#include "windbench/data.hpp"
#include "windbench/metrics.hpp"

namespace windbench::pipeline {

namespace fs = std::filesystem;

struct PrepareOptions {
  double ratio = 0.8;
  std::uint64_t seed = 42;
  data::SplitMode mode = data::SplitMode::Random;
};

struct PrepareSummary {
  std::size_t raw_rows = 0;
  std::size_t hourly_rows = 0;
  std::size_t complete_rows = 0;
  std::size_t dropped_rows = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::vector<std::string> constant_columns;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// parse -> hourly aggregation -> complete rows -> split -> standardize (fit on
/// train). Writes hourly.csv, train.csv, test.csv and prepared.json to out_dir.
PrepareSummary cmd_prepare(const fs::path& raw_csv, const fs::path& mapping, const fs::path& out_dir,
                           const PrepareOptions& opts);

/// Only the training split; training never opens test.csv.
data::Dataset load_train(const fs::path& prepared_dir);
data::Dataset load_test(const fs::path& prepared_dir);

/// Model input matrix: X itself, or lookback windows for recurrent models.
Matrix model_inputs(const data::Dataset& ds, const nlohmann::json& hyperparams);

struct TrainRecord {
  std::string id;
  bool ok = false;
  std::string error;  // "Kind: message" on failure
  double seconds = 0.0;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// Fits every model in config.models on the training split and stores it in
/// models_dir, together with train_status.json. A failing model is recorded
/// and does not stop the others.
std::vector<TrainRecord> cmd_train(const fs::path& prepared_dir, const fs::path& models_dir,
                                   const config::RunConfig& config);

struct ModelResult {
  std::string id;
  std::string algorithm;
  bool ok = false;
  std::string error;
  metrics::MetricsReport metrics;
  std::vector<std::string> files;  // emitted plots and tables, relative to the output directory
};

struct RunReport {
  std::string profile;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<ModelResult> models;  // report order
  std::vector<std::string> files;   // dataset-level plots
  std::vector<std::string> warnings;
  std::map<std::string, double> seconds;  // wall clock per phase

  [[nodiscard]] nlohmann::json to_json() const;
};

/// Test-split metrics, per-model plots and the comparison tables. Throws
/// NotFitted when none of the requested models has a stored fit.
RunReport cmd_evaluate(const fs::path& prepared_dir, const fs::path& models_dir, const fs::path& out_dir,
                       const config::RunConfig& config);

/// Markdown table in report order: Model | Algorithm | MAE | MSE | MedAE | R2 Score.
std::string report_markdown(const RunReport& report);
/// Same rows as CSV at fixed precision.
std::string report_csv(const RunReport& report);

struct AcceptanceCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ReproduceResult {
  RunReport report;
  std::vector<TrainRecord> training;
  std::vector<AcceptanceCheck> checks;
  int exit_code = 0;  // 0 ok, 3 a model failed to train, 4 an acceptance check failed
};

/// Full run into config.output: data (synthetic or raw), prepared/, models/,
/// then the report files.
ReproduceResult cmd_reproduce(const config::RunConfig& config);

}  // namespace windbench::pipeline
