#include "windbench/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "windbench/deep_models.hpp"
#include "windbench/diagnostics.hpp"
#include "windbench/models.hpp"
#include "windbench/plot.hpp"
#include "windbench/synth.hpp"

namespace windbench::pipeline {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_json(const fs::path& path, const json& j) { plot::write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

std::string describe(const std::exception& e) {
  if (dynamic_cast<const Error*>(&e)) return e.what();
  return std::string("Error: ") + e.what();
}

std::vector<std::size_t> ids_of(const data::Dataset& ds) { return ds.row_ids; }

}  // namespace

json PrepareSummary::to_json() const {
  return {{"raw_rows", raw_rows},           {"hourly_rows", hourly_rows}, {"complete_rows", complete_rows},
          {"dropped_rows", dropped_rows},   {"train_rows", train_rows},   {"test_rows", test_rows},
          {"constant_columns", constant_columns}};
}

PrepareSummary cmd_prepare(const fs::path& raw_csv, const fs::path& mapping_path, const fs::path& out_dir,
                           const PrepareOptions& opts) {
  const auto mapping = data::ColumnMapping::load(mapping_path);
  const auto raw = data::parse_csv(raw_csv, mapping);
  const auto hourly = data::aggregate_hourly(raw, mapping);
  const auto built = data::build_dataset(hourly, mapping);
  const auto sp = data::split(built.data, opts.ratio, opts.seed, opts.mode);
  const auto standardizer = data::fit_standardizer(sp.train);

  fs::create_directories(out_dir);
  data::write_dataset_csv(out_dir / "hourly.csv", built.data);
  data::write_dataset_csv(out_dir / "train.csv", standardizer.apply(sp.train));
  data::write_dataset_csv(out_dir / "test.csv", standardizer.apply(sp.test));

  PrepareSummary s;
  s.raw_rows = raw.rows();
  s.hourly_rows = hourly.rows();
  s.complete_rows = built.data.rows();
  s.dropped_rows = built.dropped;
  s.train_rows = sp.train.rows();
  s.test_rows = sp.test.rows();
  for (auto c : standardizer.constant_columns()) s.constant_columns.push_back(built.data.feature_names[c]);

  json sidecar = {
      {"mapping", json::parse(mapping.to_json().dump())},
      {"feature_names", built.data.feature_names},
      {"target_name", built.data.target_name},
      {"standardizer", standardizer.to_json()},
      {"split",
       {{"ratio", opts.ratio},
        {"seed", opts.seed},
        {"mode", data::to_string(opts.mode)},
        {"train_rows", ids_of(sp.train)},
        {"test_rows", ids_of(sp.test)}}},
      {"summary", s.to_json()},
      {"files", {{"hourly", "hourly.csv"}, {"train", "train.csv"}, {"test", "test.csv"}}},
  };
  write_json(out_dir / "prepared.json", sidecar);
  return s;
}

data::Dataset load_train(const fs::path& prepared_dir) {
  const auto path = prepared_dir / "train.csv";
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "missing prepared training split " + path.string());
  return data::read_dataset_csv(path);
}

data::Dataset load_test(const fs::path& prepared_dir) {
  const auto path = prepared_dir / "test.csv";
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "missing prepared test split " + path.string());
  return data::read_dataset_csv(path);
}

Matrix model_inputs(const data::Dataset& ds, const json& hyperparams) {
  const auto lookback = hyperparams.value("lookback", std::size_t{1});
  return lookback > 1 ? data::lookback_windows(ds, lookback) : ds.X;
}

json TrainRecord::to_json() const {
  json j = {{"model", id}, {"ok", ok}, {"seconds", seconds}};
  if (!ok) j["error"] = error;
  return j;
}

std::vector<TrainRecord> cmd_train(const fs::path& prepared_dir, const fs::path& models_dir,
                                   const config::RunConfig& config) {
  if (config.models.empty()) throw Error(ErrorKind::Usage, "no models selected");
  const auto train = load_train(prepared_dir);
  fs::create_directories(models_dir);

  std::vector<TrainRecord> records(config.models.size());
  auto run_one = [&](std::size_t k) {
    const auto& id = config.models[k];
    auto& rec = records[k];
    rec.id = id;
    for (const char* suffix : {".json", ".params.bin", ".trace.csv"}) fs::remove(models_dir / (id + suffix));
    const auto t0 = Clock::now();
    try {
      const auto& spec = models::find(id);
      const auto& hp = config.hyperparams.at(id);
      auto model = models::make_regressor(spec.type, hp);
      model->fit(model_inputs(train, hp), train.y);
      models::save_model(*model, models_dir, id);
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = describe(e);
    }
    rec.seconds = seconds_since(t0);
  };

  const unsigned workers = std::min<unsigned>(config.jobs, static_cast<unsigned>(config.models.size()));
  if (workers <= 1) {
    for (std::size_t k = 0; k < config.models.size(); ++k) run_one(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < config.models.size(); k = next++) run_one(k);
      });
    }
    for (auto& t : pool) t.join();
  }

  json status = json::array();
  for (const auto& r : records) status.push_back(r.to_json());
  write_json(models_dir / "train_status.json", status);
  return records;
}

json RunReport::to_json() const {
  json rows = json::array();
  for (const auto& m : models) {
    json r = {{"model", m.id}, {"algorithm", m.algorithm}, {"ok", m.ok}, {"files", m.files}};
    if (m.ok) r["metrics"] = m.metrics.to_json();
    else r["error"] = m.error;
    rows.push_back(r);
  }
  json secs = json::object();
  for (const auto& [k, v] : seconds) secs[k] = v;
  return {{"profile", profile},  {"seed", seed},   {"config_hash", config_hash}, {"models", rows},
          {"files", files},      {"warnings", warnings}, {"seconds", secs}};
}

namespace {

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "undefined";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void emit_series(const fs::path& out_dir, const std::string& stem, const diagnostics::PlotSeries& s,
                 std::vector<std::string>& files) {
  plot::write_svg(out_dir / "plots" / (stem + ".svg"), s);
  plot::write_series_csv(out_dir / "plots" / (stem + ".csv"), s);
  files.push_back("plots/" + stem + ".svg");
  files.push_back("plots/" + stem + ".csv");
}

}  // namespace

std::string report_markdown(const RunReport& report) {
  std::string md = "# Model comparison\n\n";
  md += "Profile `" + report.profile + "`, seed " + std::to_string(report.seed) + ", config hash `" +
        report.config_hash + "`.\n";
  std::size_t n = 0;
  for (const auto& m : report.models)
    if (m.ok) n = m.metrics.n;
  md += "Metrics on the held-out test split (" + std::to_string(n) + " rows).\n\n";
  md += "| Model | Algorithm | MAE | MSE | MedAE | R2 Score |\n";
  md += "|---|---|---|---|---|---|\n";
  for (const auto& m : report.models) {
    if (!m.ok) continue;
    md += "| " + m.id + " | " + m.algorithm + " | " + fixed(m.metrics.mae, 3) + " | " + fixed(m.metrics.mse, 3) +
          " | " + fixed(m.metrics.medae, 3) + " | " + fixed(m.metrics.r2, 3) + " |\n";
  }
  bool any_failed = false;
  for (const auto& m : report.models) any_failed = any_failed || !m.ok;
  if (any_failed) {
    md += "\n## Not evaluated\n\n";
    for (const auto& m : report.models)
      if (!m.ok) md += "- " + m.id + ": " + m.error + "\n";
  }
  if (!report.warnings.empty()) {
    md += "\n## Warnings\n\n";
    for (const auto& w : report.warnings) md += "- " + w + "\n";
  }
  return md;
}

std::string report_csv(const RunReport& report) {
  std::string out = "model,algorithm,mae,mse,medae,r2,n\n";
  for (const auto& m : report.models) {
    if (!m.ok) continue;
    out += m.id + "," + csv_field(m.algorithm) + "," + fixed(m.metrics.mae, 6) + "," + fixed(m.metrics.mse, 6) +
           "," + fixed(m.metrics.medae, 6) + "," + fixed(m.metrics.r2, 6) + "," + std::to_string(m.metrics.n) + "\n";
  }
  return out;
}

RunReport cmd_evaluate(const fs::path& prepared_dir, const fs::path& models_dir, const fs::path& out_dir,
                       const config::RunConfig& config) {
  const auto t0 = Clock::now();
  const auto test = load_test(prepared_dir);
  fs::create_directories(out_dir / "plots");
  fs::create_directories(out_dir / "metrics");

  std::map<std::string, std::string> train_errors;
  if (fs::exists(models_dir / "train_status.json")) {
    for (const auto& r : read_json(models_dir / "train_status.json"))
      if (!r.value("ok", false)) train_errors[r.at("model").get<std::string>()] = r.value("error", "");
  }

  RunReport report;
  report.profile = config.profile;
  report.seed = config.seed;
  report.config_hash = config.hash();
  const std::span<const double> y(test.y.data(), static_cast<std::size_t>(test.y.size()));

  for (const auto& id : config.models) {
    const auto& spec = models::find(id);
    const auto& hp = config.hyperparams.at(id);
    ModelResult res;
    res.id = id;
    res.algorithm = models::algorithm_label(spec, hp);
    try {
      const auto model = models::load_model(models_dir, id);
      const Vector yhat = model->predict(model_inputs(test, hp));
      const std::span<const double> p(yhat.data(), static_cast<std::size_t>(yhat.size()));
      res.metrics = metrics::evaluate(y, p, id, res.algorithm);
      if (!res.metrics.r2_defined) report.warnings.push_back(id + ": R2 undefined (test targets have zero variance)");
      emit_series(out_dir, id + "_pred_qq", diagnostics::pred_qq_series(y, p), res.files);
      emit_series(out_dir, id + "_residual", diagnostics::residual_series(y, p), res.files);
      if (const auto* net = dynamic_cast<const nn::NeuralRegressor*>(model.get())) {
        const auto& tr = net->trace();
        emit_series(out_dir, id + "_loss", diagnostics::epoch_series(tr.loss, id + " training loss", "loss (scaled target)"),
                    res.files);
        emit_series(out_dir, id + "_mse", diagnostics::epoch_series(tr.mse, id + " training MSE", "MSE"), res.files);
      }
      write_json(out_dir / "metrics" / (id + ".json"), res.metrics.to_json());
      res.files.push_back("metrics/" + id + ".json");
      res.ok = true;
    } catch (const std::exception& e) {
      res.ok = false;
      const auto it = train_errors.find(id);
      res.error = it != train_errors.end() ? "training failed: " + it->second : describe(e);
    }
    report.models.push_back(std::move(res));
  }
  const bool any_ok = std::any_of(report.models.begin(), report.models.end(), [](const auto& m) { return m.ok; });
  if (!any_ok) throw Error(ErrorKind::NotFitted, "none of the requested models has a stored fit in " + models_dir.string());

  try {
    const auto train = load_train(prepared_dir);
    auto chi2 = diagnostics::chi2_qq_series(train.X);
    for (const auto& w : chi2.warnings) report.warnings.push_back("chi-square Q-Q: " + w);
    emit_series(out_dir, "chi2_qq", chi2, report.files);
  } catch (const Error& e) {
    report.warnings.push_back("chi-square Q-Q skipped: " + describe(e));
  }

  report.seconds["evaluate"] = seconds_since(t0);
  plot::write_text(out_dir / "report.md", report_markdown(report));
  plot::write_text(out_dir / "report.csv", report_csv(report));
  write_json(out_dir / "run_report.json", report.to_json());
  return report;
}

ReproduceResult cmd_reproduce(const config::RunConfig& config) {
  const auto t_total = Clock::now();
  const fs::path out = config.output;
  fs::create_directories(out);
  ReproduceResult result;

  config::RunConfig echo = config;
  if (!echo.raw_csv.empty()) echo.raw_csv = fs::absolute(echo.raw_csv);
  if (!echo.mapping.empty()) echo.mapping = fs::absolute(echo.mapping);
  echo.output = fs::absolute(echo.output);
  write_json(out / "config.json", echo.to_json());

  auto t0 = Clock::now();
  fs::path raw = config.raw_csv, mapping = config.mapping;
  if (config.synthetic) {
    synth::SynthOptions so;
    so.hours = config.synthetic_hours;
    so.seed = config.synthetic_seed;
    raw = synth::write_raw(out / "raw", so);
    mapping = out / "raw" / "mapping.json";
  }
  PrepareOptions po{config.split_ratio, config.split_seed, config.split_mode};
  cmd_prepare(raw, mapping, out / "prepared", po);
  const double prepare_s = seconds_since(t0);

  t0 = Clock::now();
  result.training = cmd_train(out / "prepared", out / "models", config);
  const double train_s = seconds_since(t0);

  result.report = cmd_evaluate(out / "prepared", out / "models", out, config);
  result.report.seconds["prepare"] = prepare_s;
  result.report.seconds["train"] = train_s;
  for (const auto& r : result.training) result.report.seconds["train " + r.id] = r.seconds;
  const double total = seconds_since(t_total);
  result.report.seconds["total"] = total;

  for (const auto& [id, threshold] : config.min_r2) {
    AcceptanceCheck c;
    c.name = id + " test R2 >= " + fixed(threshold, 2);
    const auto it = std::find_if(result.report.models.begin(), result.report.models.end(),
                                 [&](const auto& m) { return m.id == id; });
    if (it == result.report.models.end()) {
      c.detail = "model not selected";
    } else if (!it->ok) {
      c.detail = it->error;
    } else {
      c.pass = it->metrics.r2_defined && it->metrics.r2 >= threshold;
      c.detail = "R2 = " + fixed(it->metrics.r2, 4);
    }
    result.checks.push_back(c);
  }
  if (config.max_seconds > 0.0) {
    AcceptanceCheck c;
    c.name = "wall clock < " + fixed(config.max_seconds, 0) + " s";
    c.pass = total < config.max_seconds;
    c.detail = fixed(total, 1) + " s";
    result.checks.push_back(c);
  }

  const bool train_failed =
      std::any_of(result.training.begin(), result.training.end(), [](const auto& r) { return !r.ok; });
  const bool checks_failed =
      std::any_of(result.checks.begin(), result.checks.end(), [](const auto& c) { return !c.pass; });
  result.exit_code = checks_failed ? 4 : (train_failed ? 3 : 0);

  std::string md = report_markdown(result.report);
  if (!result.checks.empty()) {
    md += "\n## Acceptance\n\n";
    for (const auto& c : result.checks) {
      // Timing varies between runs, so only pass/fail goes into the markdown.
      const bool timing = c.name.rfind("wall clock", 0) == 0;
      md += std::string("- ") + (c.pass ? "PASS" : "FAIL") + " " + c.name + (timing ? "" : " (" + c.detail + ")") + "\n";
    }
  }
  plot::write_text(out / "report.md", md);

  json run = result.report.to_json();
  json train_json = json::array();
  for (const auto& r : result.training) train_json.push_back(r.to_json());
  json checks = json::array();
  for (const auto& c : result.checks) checks.push_back({{"check", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  run["training"] = train_json;
  run["acceptance"] = checks;
  run["exit_code"] = result.exit_code;
  run["paths"] = {{"raw", raw.generic_string()},
                  {"mapping", mapping.generic_string()},
                  {"prepared", "prepared"},
                  {"models", "models"},
                  {"report_md", "report.md"},
                  {"report_csv", "report.csv"}};
  write_json(out / "run_report.json", run);
  return result;
}

}  // namespace windbench::pipeline
