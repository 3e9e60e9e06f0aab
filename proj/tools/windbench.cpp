// windbench: prepare data, train the twelve regressors, evaluate, and report.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 training failure,
// 4 acceptance failure.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "windbench/config.hpp"
#include "windbench/models.hpp"
#include "windbench/pipeline.hpp"
#include "windbench/synth.hpp"

namespace fs = std::filesystem;
using namespace windbench;

namespace {

constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kTrainingFailure = 3;

struct CommonFlags {
  std::string config_file;
  std::string profile;
  std::string models;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> jobs;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "JSON run configuration");
  cmd->add_option("--profile", f.profile, "built-in profile: synthetic, table1, table1-prose");
  cmd->add_option("--models", f.models, "comma-separated ids (Model-1..Model-12, or 1..12), or 'all'");
  cmd->add_option("--seed", f.seed, "global seed; per-model seeds derive from it");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--jobs", f.jobs, "models trained in parallel")->check(CLI::PositiveNumber);
}

std::vector<std::string> parse_models(const std::string& text) {
  std::vector<std::string> ids;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    item = item.substr(b, item.find_last_not_of(" \t") - b + 1);
    if (item == "all") {
      for (const auto& m : models::roster()) ids.push_back(m.id);
      continue;
    }
    if (item.find_first_not_of("0123456789") == std::string::npos) item = "Model-" + item;
    models::index_of(item);
    ids.push_back(item);
  }
  if (ids.empty()) throw Error(ErrorKind::Usage, "--models selected no models");
  return ids;
}

config::RunConfig resolve(const CommonFlags& f, bool models_flag_given) {
  config::Overrides o;
  if (!f.config_file.empty()) o.config_file = f.config_file;
  if (!f.profile.empty()) o.profile = f.profile;
  if (models_flag_given) o.models = parse_models(f.models);
  o.seed = f.seed;
  if (!f.out.empty()) o.output = f.out;
  o.jobs = f.jobs;
  return config::resolve(o);
}

void print_training(const std::vector<pipeline::TrainRecord>& records) {
  for (const auto& r : records) {
    std::printf("  %-9s %s  %.1f s%s%s\n", r.id.c_str(), r.ok ? "ok    " : "FAILED", r.seconds, r.ok ? "" : "  ",
                r.ok ? "" : r.error.c_str());
  }
}

bool any_failed(const std::vector<pipeline::TrainRecord>& records) {
  for (const auto& r : records)
    if (!r.ok) return true;
  return false;
}

int exit_code_for(const Error& e) {
  if (e.kind() == ErrorKind::Usage) return kUsage;
  if (is_data_error(e.kind())) return kDataError;
  return kTrainingFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wind speed regression benchmark: twelve models on hourly met-tower data"};
  app.require_subcommand(1);

  CommonFlags prep_f, train_f, eval_f, repro_f;
  std::string raw, mapping, prepared_dir, models_dir;
  double ratio = -1.0;
  std::string split_mode;

  auto* prep = app.add_subcommand("prepare", "raw CSV -> hourly dataset -> standardized train/test split");
  add_common(prep, prep_f);
  prep->add_option("--raw", raw, "raw minute-resolution CSV export");
  prep->add_option("--mapping", mapping, "column mapping JSON");
  prep->add_option("--ratio", ratio, "training fraction (default from config, 0.8)");
  prep->add_option("--split-mode", split_mode, "random or chronological");

  auto* train = app.add_subcommand("train", "fit the selected models on the training split");
  add_common(train, train_f);
  train->add_option("--prepared", prepared_dir, "prepared data directory (default <out>/prepared)");

  auto* eval = app.add_subcommand("evaluate", "test-split metrics, plots and the comparison report");
  add_common(eval, eval_f);
  eval->add_option("--prepared", prepared_dir, "prepared data directory (default <out>/prepared)");
  eval->add_option("--models-dir", models_dir, "stored models (default <out>/models)");

  auto* repro = app.add_subcommand("reproduce", "prepare, train and evaluate in one run, then apply the checks");
  add_common(repro, repro_f);

  std::string synth_out = "synthetic";
  std::uint64_t synth_seed = synth::SynthOptions{}.seed;
  std::size_t synth_hours = synth::SynthOptions{}.hours;
  auto* syn = app.add_subcommand("synth-data", "write the seeded synthetic raw CSV and its mapping");
  syn->add_option("--out", synth_out, "output directory");
  syn->add_option("--seed", synth_seed, "generator seed");
  syn->add_option("--hours", synth_hours, "number of hourly rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (syn->parsed()) {
      synth::SynthOptions so;
      so.seed = synth_seed;
      so.hours = synth_hours;
      const auto path = synth::write_raw(synth_out, so);
      std::printf("wrote %s and %s\n", path.string().c_str(), (fs::path(synth_out) / "mapping.json").string().c_str());
      return 0;
    }

    if (prep->parsed()) {
      const auto cfg = resolve(prep_f, prep->count("--models") > 0);
      fs::path raw_path = raw.empty() ? cfg.raw_csv : fs::path(raw);
      fs::path mapping_path = mapping.empty() ? cfg.mapping : fs::path(mapping);
      if (raw_path.empty() || mapping_path.empty()) {
        throw Error(ErrorKind::Usage, "prepare needs --raw and --mapping (or a csv data source in the config)");
      }
      pipeline::PrepareOptions po{cfg.split_ratio, cfg.split_seed, cfg.split_mode};
      if (ratio >= 0.0) po.ratio = ratio;
      if (!split_mode.empty()) po.mode = data::parse_split_mode(split_mode);
      const fs::path out = prep_f.out.empty() ? cfg.output / "prepared" : fs::path(prep_f.out);
      const auto s = pipeline::cmd_prepare(raw_path, mapping_path, out, po);
      std::printf("prepared %s: %zu raw rows -> %zu hours, %zu complete (%zu dropped); train %zu, test %zu\n",
                  out.string().c_str(), s.raw_rows, s.hourly_rows, s.complete_rows, s.dropped_rows, s.train_rows,
                  s.test_rows);
      return 0;
    }

    if (train->parsed()) {
      const auto cfg = resolve(train_f, train->count("--models") > 0);
      const fs::path prepared = prepared_dir.empty() ? cfg.output / "prepared" : fs::path(prepared_dir);
      const auto records = pipeline::cmd_train(prepared, cfg.output / "models", cfg);
      std::printf("trained into %s\n", (cfg.output / "models").string().c_str());
      print_training(records);
      return any_failed(records) ? kTrainingFailure : 0;
    }

    if (eval->parsed()) {
      const auto cfg = resolve(eval_f, eval->count("--models") > 0);
      const fs::path prepared = prepared_dir.empty() ? cfg.output / "prepared" : fs::path(prepared_dir);
      const fs::path mdir = models_dir.empty() ? cfg.output / "models" : fs::path(models_dir);
      const auto report = pipeline::cmd_evaluate(prepared, mdir, cfg.output, cfg);
      std::cout << pipeline::report_markdown(report);
      for (const auto& m : report.models)
        if (!m.ok) return kTrainingFailure;
      return 0;
    }

    if (repro->parsed()) {
      const auto cfg = resolve(repro_f, repro->count("--models") > 0);
      const auto result = pipeline::cmd_reproduce(cfg);
      std::printf("run directory %s (config hash %s)\n", cfg.output.string().c_str(), result.report.config_hash.c_str());
      print_training(result.training);
      std::cout << "\n" << pipeline::report_markdown(result.report);
      if (!result.checks.empty()) std::cout << "\n";
      for (const auto& c : result.checks)
        std::printf("%s %s (%s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
      return result.exit_code;
    }
  } catch (const Error& e) {
    std::cerr << "windbench: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "windbench: " << e.what() << "\n";
    return kTrainingFailure;
  }
  return kUsage;
}
