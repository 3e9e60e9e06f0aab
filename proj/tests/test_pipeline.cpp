#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "windbench/config.hpp"
#include "windbench/models.hpp"
#include "windbench/pipeline.hpp"
#include "windbench/synth.hpp"

using namespace windbench;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("windbench_pipeline_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// A short run: few hours, small ensembles, a handful of epochs.
json small_run(const fs::path& out) {
  return {{"profile", "synthetic"},
          {"data", {{"synthetic", {{"hours", 240}}}}},
          {"models", {"Model-1", "Model-3", "Model-7", "Model-8", "Model-9", "Model-10", "Model-11", "Model-12"}},
          {"hyperparams",
           {{"Model-7", {{"n_estimators", 10}}},
            {"Model-8", {{"n_estimators", 5}}},
            {"Model-10", {{"epochs", 3}, {"hidden_layers", 2}}},
            {"Model-11", {{"epochs", 3}}},
            {"Model-12", {{"epochs", 3}, {"units", 8}}}}},
          {"acceptance", {{"min_r2", {{"Model-7", -1e9}, {"Model-12", -1e9}}}, {"max_seconds", 0}}},
          {"output", out.string()}};
}

config::RunConfig resolve_file(const fs::path& file, const json& doc) {
  write(file, doc.dump(2));
  config::Overrides o;
  o.config_file = file;
  return config::resolve(o);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(WINDBENCH_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("roster holds the twelve models in order") {
  const auto& r = models::roster();
  REQUIRE(r.size() == 12);
  for (std::size_t k = 0; k < 12; ++k) CHECK(r[k].id == "Model-" + std::to_string(k + 1));
  CHECK(models::find("Model-12").type == "lstm");
  CHECK(models::find("Model-7").type == "random_forest");
  CHECK_THROWS_AS(models::index_of("Model-13"), Error);
}

TEST_CASE("profiles: table1-prose differs from table1 only in the ridge and lasso alphas") {
  config::Overrides a, b;
  a.profile = "table1";
  b.profile = "table1-prose";
  json ja = config::resolve(a).to_json();
  json jb = config::resolve(b).to_json();
  CHECK(ja["hyperparams"]["Model-2"]["alpha"] == 0.01);
  CHECK(ja["hyperparams"]["Model-3"]["alpha"] == 0.01);
  CHECK(jb["hyperparams"]["Model-2"]["alpha"] == 15.0);
  CHECK(jb["hyperparams"]["Model-3"]["alpha"] == 0.1);
  for (auto* j : {&ja, &jb}) {
    j->erase("profile");
    (*j)["hyperparams"]["Model-2"].erase("alpha");
    (*j)["hyperparams"]["Model-3"].erase("alpha");
  }
  CHECK(ja == jb);
}

TEST_CASE("config resolution order and validation") {
  const auto dir = scratch("config");
  auto c = resolve_file(dir / "run.json", {{"seed", 7}, {"output", "out"}, {"hyperparams", {{"Model-2", {{"alpha", 3.0}}}}}});
  CHECK(c.seed == 7);
  CHECK(c.hyperparams.at("Model-2")["alpha"] == 3.0);
  CHECK(c.output == dir / "out");
  CHECK(config::resolve({}).output == "run");

  config::Overrides o;
  o.config_file = dir / "run.json";
  o.seed = 9;
  o.models = std::vector<std::string>{"Model-9", "Model-2"};
  const auto flagged = config::resolve(o);
  CHECK(flagged.seed == 9);
  CHECK(flagged.models == std::vector<std::string>{"Model-2", "Model-9"});
  CHECK(flagged.hyperparams.count("Model-1") == 0);

  std::set<std::uint64_t> seeds;
  for (const auto& id : {"Model-6", "Model-7", "Model-8", "Model-10", "Model-11", "Model-12"})
    seeds.insert(config::resolve({}).hyperparams.at(id)["seed"].get<std::uint64_t>());
  CHECK(seeds.size() == 6);

  auto kind = [&](const json& doc) {
    try {
      resolve_file(dir / "bad.json", doc);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  CHECK(kind({{"models", json::array()}}) == ErrorKind::Usage);
  CHECK(kind({{"models", {"Model-99"}}}) == ErrorKind::Usage);
  CHECK(kind({{"profile", "nope"}}) == ErrorKind::Usage);
  CHECK(kind({{"split", {{"ratio", 1.5}}}}) == ErrorKind::Usage);
  CHECK(config::resolve({}).hash() == config::resolve({}).hash());
  CHECK(config::fnv1a_hex("") == "cbf29ce484222325");
  fs::remove_all(dir);
}

TEST_CASE("synthetic generator is seeded and hour aligned") {
  synth::SynthOptions so;
  so.hours = 48;
  const auto a = synth::generate_hourly(so);
  const auto b = synth::generate_hourly(so);
  CHECK(a.X == b.X);
  CHECK(a.y == b.y);
  CHECK(a.X.cols() == 17);
  so.seed = 7;
  CHECK(synth::generate_hourly(so).y != a.y);
}

TEST_CASE("prepare: hourly rows equal distinct hours and reruns are byte identical") {
  const auto dir = scratch("prepare");
  synth::SynthOptions so;
  so.hours = 100;
  const auto raw = synth::write_raw(dir / "raw", so);
  const auto s = pipeline::cmd_prepare(raw, dir / "raw" / "mapping.json", dir / "p1", {});
  pipeline::cmd_prepare(raw, dir / "raw" / "mapping.json", dir / "p2", {});
  CHECK(s.raw_rows == 400);
  CHECK(s.hourly_rows == 100);
  CHECK(s.train_rows == 80);
  CHECK(s.test_rows == 20);
  for (const char* f : {"hourly.csv", "train.csv", "test.csv", "prepared.json"})
    CHECK(slurp(dir / "p1" / f) == slurp(dir / "p2" / f));

  // hourly means recover the generator's hourly values: the jitter is symmetric
  const auto hourly = data::read_dataset_csv(dir / "p1" / "hourly.csv");
  const auto truth = synth::generate_hourly(so);
  CHECK((hourly.y - truth.y).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(pipeline::cmd_prepare(raw, dir / "missing.json", dir / "p3", {}), Error);
  fs::remove_all(dir);
}

TEST_CASE("train one model, then evaluate") {
  const auto dir = scratch("train");
  synth::SynthOptions so;
  so.hours = 120;
  const auto raw = synth::write_raw(dir / "raw", so);
  pipeline::cmd_prepare(raw, dir / "raw" / "mapping.json", dir / "prepared", {});
  config::Overrides o;
  o.models = std::vector<std::string>{"Model-1"};
  o.output = dir;
  const auto cfg = config::resolve(o);
  const auto rec = pipeline::cmd_train(dir / "prepared", dir / "models", cfg);
  REQUIRE(rec.size() == 1);
  CHECK(rec[0].ok);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "models"))
    if (e.path().filename() != "train_status.json") ++files;
  CHECK(files == 1);
  const auto report = pipeline::cmd_evaluate(dir / "prepared", dir / "models", dir, cfg);
  CHECK(report.models.size() == 1);
  CHECK(fs::exists(dir / "plots" / "Model-1_pred_qq.svg"));
  CHECK(fs::exists(dir / "plots" / "Model-1_residual.svg"));
  CHECK(fs::exists(dir / "plots" / "chi2_qq.svg"));
  CHECK(fs::exists(dir / "report.csv"));

  config::Overrides more = o;
  more.models = std::vector<std::string>{"Model-1", "Model-2"};
  const auto partial = pipeline::cmd_evaluate(dir / "prepared", dir / "models", dir, config::resolve(more));
  CHECK(partial.models[0].ok);
  CHECK_FALSE(partial.models[1].ok);
  fs::remove_all(dir);
}

TEST_CASE("report rows for perfect and mean predictors") {
  pipeline::RunReport r;
  pipeline::ModelResult perfect;
  perfect.id = "Model-1";
  perfect.algorithm = "Multiple linear regression";
  perfect.ok = true;
  const std::vector<double> y{1, 2, 3, 4};
  perfect.metrics = metrics::evaluate(y, y);
  pipeline::ModelResult mean = perfect;
  mean.id = "Model-2";
  mean.algorithm = "Ridge regression (alpha=0.01)";
  mean.metrics = metrics::evaluate(y, std::vector<double>(4, 2.5));
  pipeline::ModelResult failed;
  failed.id = "Model-3";
  r.models = {perfect, mean, failed};
  const auto csv = pipeline::report_csv(r);
  CHECK(csv ==
        "model,algorithm,mae,mse,medae,r2,n\n"
        "Model-1,Multiple linear regression,0.000000,0.000000,0.000000,1.000000,4\n"
        "Model-2,Ridge regression (alpha=0.01),1.000000,1.250000,1.000000,0.000000,4\n");
  const auto md = pipeline::report_markdown(r);
  CHECK(md.find("| Model | Algorithm | MAE | MSE | MedAE | R2 Score |") != std::string::npos);
  CHECK(md.find("| Model-1 | Multiple linear regression | 0.000 | 0.000 | 0.000 | 1.000 |") != std::string::npos);
}

TEST_CASE("reproduce is deterministic") {
  const auto dir = scratch("reproduce");
  const auto c1 = resolve_file(dir / "a.json", small_run(dir / "run1"));
  const auto c2 = resolve_file(dir / "b.json", small_run(dir / "run2"));
  const auto r1 = pipeline::cmd_reproduce(c1);
  const auto r2 = pipeline::cmd_reproduce(c2);
  CHECK(r1.exit_code == 0);
  CHECK(r1.report.config_hash == r2.report.config_hash);
  CHECK(slurp(dir / "run1" / "report.csv") == slurp(dir / "run2" / "report.csv"));
  CHECK(slurp(dir / "run1" / "plots" / "Model-12_pred_qq.svg") == slurp(dir / "run2" / "plots" / "Model-12_pred_qq.svg"));
  CHECK(fs::exists(dir / "run1" / "plots" / "Model-12_loss.svg"));
  CHECK(fs::exists(dir / "run1" / "models" / "Model-12.params.bin"));
  fs::remove_all(dir);
}

TEST_CASE("reproduce exit code reflects failed checks") {
  const auto dir = scratch("checks");
  auto doc = small_run(dir / "run");
  doc["models"] = {"Model-1", "Model-7", "Model-12"};
  doc["acceptance"]["min_r2"]["Model-1"] = 2.0;  // unreachable
  const auto r = pipeline::cmd_reproduce(resolve_file(dir / "c.json", doc));
  CHECK(r.exit_code == 4);
  fs::remove_all(dir);
}

TEST_CASE("command-line exit codes") {
  const auto dir = scratch("cli");
  CHECK(run_cli("") == 1);
  CHECK(run_cli("bogus") == 1);
  CHECK(run_cli("train --models Model-13 --out " + (dir / "x").string()) == 1);
  CHECK(run_cli("reproduce --profile nope") == 1);
  CHECK(run_cli("prepare --raw " + (dir / "none.csv").string() + " --mapping " + (dir / "none.json").string()) == 2);
  CHECK(run_cli("synth-data --hours 30 --out " + (dir / "syn").string()) == 0);
  write(dir / "empty.csv", "");
  CHECK(run_cli("prepare --raw " + (dir / "empty.csv").string() + " --mapping " + (dir / "syn" / "mapping.json").string() +
                " --out " + (dir / "p").string()) == 2);
  CHECK(run_cli("prepare --raw " + (dir / "syn" / "raw.csv").string() + " --mapping " +
                (dir / "syn" / "mapping.json").string() + " --out " + (dir / "p").string()) == 0);
  CHECK(run_cli("evaluate --models 1 --prepared " + (dir / "p").string() + " --out " + (dir / "out").string()) == 3);
  CHECK(run_cli("train --models 1,2 --prepared " + (dir / "p").string() + " --out " + (dir / "out").string()) == 0);
  CHECK(run_cli("evaluate --models 1,2 --prepared " + (dir / "p").string() + " --out " + (dir / "out").string()) == 0);
  fs::remove_all(dir);
}
