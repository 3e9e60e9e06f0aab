#include "windbench/config.hpp"

#include <cstdio>
#include <fstream>

#include "windbench/models.hpp"

namespace windbench::config {

namespace fs = std::filesystem;
using nlohmann::json;

json defaults() {
  json models = json::array();
  for (const auto& m : models::roster()) models.push_back(m.id);
  return {
      {"profile", "synthetic"},
      {"data",
       {{"source", "synthetic"}, {"raw_csv", ""}, {"mapping", ""}, {"synthetic", {{"hours", 2208}, {"seed", 2018}}}}},
      {"split", {{"ratio", 0.8}, {"seed", 42}, {"mode", "random"}}},
      {"seed", 42},
      {"models", models},
      {"hyperparams",
       {
           {"Model-1", json::object()},
           {"Model-2", {{"alpha", 0.01}}},
           {"Model-3", {{"alpha", 0.01}, {"tol", 1e-6}, {"max_iter", 10000}}},
           {"Model-4", {{"max_iter", 300}, {"tol", 1e-4}}},
           {"Model-5", {{"delta", 1.35}, {"alpha", 1e-4}, {"tol", 1e-6}, {"max_iter", 1000}}},
           {"Model-6", {{"n_estimators", 100}, {"max_depth", nullptr}}},
           {"Model-7", {{"n_estimators", 100}, {"max_depth", nullptr}, {"max_features", nullptr}}},
           {"Model-8", {{"n_estimators", 100}, {"max_depth", 3}, {"learning_rate", 1.0}}},
           {"Model-9",
            {{"C", 1.0}, {"epsilon", 0.1}, {"kernel", {{"type", "rbf"}, {"gamma", "scale"}}},
             {"tol", 1e-3}, {"max_iter", 100000}}},
           {"Model-10",
            {{"hidden_layers", 13}, {"width", 32}, {"activation", "relu"}, {"init", "he"}, {"epochs", 500},
             {"batch_size", 32}, {"optimizer", "adam"}, {"learning_rate", 1e-3}}},
           {"Model-11",
            {{"filters", 64}, {"kernel_size", 2}, {"pool", 2}, {"dense_width", 50}, {"init", "he"},
             {"epochs", 500}, {"batch_size", 32}, {"optimizer", "adam"}, {"learning_rate", 1e-3}}},
           {"Model-12",
            {{"units", 50}, {"lookback", 1}, {"init", "normal"}, {"epochs", 500}, {"batch_size", 32},
             {"optimizer", "adam"}, {"learning_rate", 1e-3}}},
       }},
      {"output", "run"},
      {"jobs", 1},
      {"acceptance", {{"min_r2", json::object()}, {"max_seconds", 0}}},
  };
}

std::vector<std::string> profile_names() { return {"synthetic", "table1", "table1-prose"}; }

json profile_patch(const std::string& name) {
  if (name == "synthetic") {
    return {{"profile", "synthetic"},
            {"data", {{"source", "synthetic"}}},
            {"acceptance", {{"min_r2", {{"Model-7", 0.85}, {"Model-12", 0.85}}}, {"max_seconds", 300}}}};
  }
  if (name == "table1") {
    return {{"profile", "table1"},
            {"data", {{"source", "csv"}, {"raw_csv", "data/nrel_m2_2018.csv"}, {"mapping", "configs/nrel_m2_mapping.json"}}}};
  }
  if (name == "table1-prose") {
    json p = profile_patch("table1");
    p["profile"] = "table1-prose";
    p["hyperparams"] = {{"Model-2", {{"alpha", 15.0}}}, {"Model-3", {{"alpha", 0.1}}}};
    return p;
  }
  std::string names;
  for (const auto& n : profile_names()) names += (names.empty() ? "" : ", ") + n;
  throw Error(ErrorKind::Usage, "unknown profile '" + name + "' (available: " + names + ")");
}

void merge(json& target, const json& patch) {
  if (!patch.is_object() || !target.is_object()) {
    target = patch;
    return;
  }
  for (const auto& [key, value] : patch.items()) {
    if (value.is_null() && !target.contains(key)) continue;
    if (value.is_object() && target.contains(key) && target[key].is_object()) {
      merge(target[key], value);
    } else {
      target[key] = value;
    }
  }
}

namespace {

bool uses_seed(const std::string& type) {
  return type == "bagging" || type == "random_forest" || type == "adaboost_r2" || type == "mlp" ||
         type == "cnn1d" || type == "lstm";
}

fs::path resolve_path(const std::string& p, const fs::path& base) {
  if (p.empty()) return {};
  fs::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

template <typename T>
T get_or_throw(const json& j, const char* where) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Usage, std::string("config field ") + where + ": " + e.what());
  }
}

}  // namespace

RunConfig from_json(const json& doc, const fs::path& base_dir) {
  RunConfig c;
  try {
    c.profile = doc.at("profile").get<std::string>();
    const auto& d = doc.at("data");
    const auto source = d.at("source").get<std::string>();
    if (source != "synthetic" && source != "csv")
      throw Error(ErrorKind::Usage, "data.source must be 'synthetic' or 'csv'");
    c.synthetic = source == "synthetic";
    c.raw_csv = resolve_path(d.value("raw_csv", std::string()), base_dir);
    c.mapping = resolve_path(d.value("mapping", std::string()), base_dir);
    if (d.contains("synthetic")) {
      c.synthetic_hours = d["synthetic"].value("hours", c.synthetic_hours);
      c.synthetic_seed = d["synthetic"].value("seed", c.synthetic_seed);
    }
    const auto& s = doc.at("split");
    c.split_ratio = s.value("ratio", c.split_ratio);
    c.split_seed = s.value("seed", c.split_seed);
    c.split_mode = data::parse_split_mode(s.value("mode", std::string("random")));
    c.seed = doc.value("seed", c.seed);
    c.output = resolve_path(doc.value("output", std::string("run")), base_dir);
    c.jobs = doc.value("jobs", 1u);
    if (c.jobs == 0) throw Error(ErrorKind::Usage, "jobs must be >= 1");

    const auto ids = get_or_throw<std::vector<std::string>>(doc.at("models"), "models");
    if (ids.empty()) throw Error(ErrorKind::Usage, "no models selected");
    std::vector<bool> seen(models::roster().size(), false);
    for (const auto& id : ids) {
      const auto k = models::index_of(id);
      if (seen[k]) throw Error(ErrorKind::Usage, "model " + id + " listed twice");
      seen[k] = true;
    }
    for (std::size_t k = 0; k < seen.size(); ++k)
      if (seen[k]) c.models.push_back(models::roster()[k].id);

    const auto& hp = doc.at("hyperparams");
    for (const auto& id : c.models) {
      json h = hp.contains(id) ? hp.at(id) : json::object();
      const auto& spec = models::find(id);
      if (uses_seed(spec.type) && !h.contains("seed")) {
        h["seed"] = mix_seed(c.seed + static_cast<std::uint64_t>(models::index_of(id)) + 1);
      }
      if (spec.type == "svr" && h.contains("kernel") && h["kernel"].value("gamma", json()).is_string()) {
        if (h["kernel"]["gamma"].get<std::string>() != "scale")
          throw Error(ErrorKind::Usage, "svr gamma must be a number or \"scale\"");
        h["kernel"].erase("gamma");
      }
      c.hyperparams[id] = h;
    }

    const auto& acc = doc.at("acceptance");
    const json min_r2 = acc.value("min_r2", json::object());
    for (const auto& [id, v] : min_r2.items()) {
      models::index_of(id);
      c.min_r2[id] = v.get<double>();
    }
    c.max_seconds = acc.value("max_seconds", 0.0);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Usage, std::string("config: ") + e.what());
  }
  if (!c.synthetic && (c.raw_csv.empty() || c.mapping.empty()))
    throw Error(ErrorKind::Usage, "data.source 'csv' needs data.raw_csv and data.mapping");
  if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) throw Error(ErrorKind::Usage, "split.ratio must be in (0, 1)");
  return c;
}

RunConfig resolve(const Overrides& o) {
  json file_doc = json::object();
  fs::path base;
  if (o.config_file) {
    std::ifstream in(*o.config_file);
    if (!in) throw Error(ErrorKind::Usage, "cannot open config file " + o.config_file->string());
    try {
      file_doc = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Usage, o.config_file->string() + ": " + e.what());
    }
    if (!file_doc.is_object()) throw Error(ErrorKind::Usage, "config file must hold a JSON object");
    base = o.config_file->parent_path();
  }
  std::string profile = "synthetic";
  if (file_doc.contains("profile")) profile = file_doc["profile"].get<std::string>();
  if (o.profile) profile = *o.profile;

  json doc = defaults();
  merge(doc, profile_patch(profile));
  merge(doc, file_doc);
  doc["profile"] = profile;
  if (o.models) doc["models"] = *o.models;
  if (o.seed) doc["seed"] = *o.seed;
  if (o.output) doc["output"] = o.output->string();
  if (o.jobs) doc["jobs"] = *o.jobs;
  // Paths given in a config file are relative to that file; all others are
  // relative to the working directory.
  RunConfig c = from_json(doc);
  auto from_file = [&](const char* section, const char* key) {
    if (key == nullptr) return file_doc.contains(section);
    return file_doc.contains(section) && file_doc[section].is_object() && file_doc[section].contains(key);
  };
  auto rebase = [&](fs::path& p, bool in_file) {
    if (in_file && !base.empty() && !p.empty() && p.is_relative()) p = (base / p).lexically_normal();
  };
  rebase(c.raw_csv, from_file("data", "raw_csv"));
  rebase(c.mapping, from_file("data", "mapping"));
  rebase(c.output, !o.output && from_file("output", nullptr));
  return c;
}

json RunConfig::to_json() const {
  json hp = json::object();
  for (const auto& [id, h] : hyperparams) hp[id] = h;
  json mr = json::object();
  for (const auto& [id, v] : min_r2) mr[id] = v;
  return {{"profile", profile},
          {"data",
           {{"source", synthetic ? "synthetic" : "csv"},
            {"raw_csv", raw_csv.generic_string()},
            {"mapping", mapping.generic_string()},
            {"synthetic", {{"hours", synthetic_hours}, {"seed", synthetic_seed}}}}},
          {"split", {{"ratio", split_ratio}, {"seed", split_seed}, {"mode", data::to_string(split_mode)}}},
          {"seed", seed},
          {"models", models},
          {"hyperparams", hp},
          {"output", output.generic_string()},
          {"jobs", jobs},
          {"acceptance", {{"min_r2", mr}, {"max_seconds", max_seconds}}}};
}

std::string RunConfig::hash() const {
  json j = to_json();
  j.erase("output");
  j.erase("jobs");
  return fnv1a_hex(j.dump());
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace windbench::config
