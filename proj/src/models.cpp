#include "windbench/models.hpp"

#include <cstdio>
#include <fstream>

#include "windbench/deep_models.hpp"
#include "windbench/linear.hpp"
#include "windbench/svr.hpp"
#include "windbench/tree.hpp"

namespace windbench::models {

const std::vector<ModelSpec>& roster() {
  static const std::vector<ModelSpec> specs = {
      {"Model-1", "Multiple linear regression", "ols", false},
      {"Model-2", "Ridge regression", "ridge", false},
      {"Model-3", "Lasso regression", "lasso", false},
      {"Model-4", "Bayesian ridge regression", "bayesian_ridge", false},
      {"Model-5", "Huber regression", "huber", false},
      {"Model-6", "Bagging regression", "bagging", false},
      {"Model-7", "Random forest regression", "random_forest", false},
      {"Model-8", "AdaBoost.R2 regression", "adaboost_r2", false},
      {"Model-9", "Support vector regression", "svr", false},
      {"Model-10", "MLP/DNN", "mlp", true},
      {"Model-11", "1D CNN", "cnn1d", true},
      {"Model-12", "LSTM", "lstm", true},
  };
  return specs;
}

std::size_t index_of(const std::string& id) {
  const auto& r = roster();
  for (std::size_t k = 0; k < r.size(); ++k)
    if (r[k].id == id) return k;
  throw Error(ErrorKind::Usage, "unknown model id '" + id + "' (expected Model-1 ... Model-12)");
}

const ModelSpec& find(const std::string& id) { return roster()[index_of(id)]; }

namespace {

std::string num(const nlohmann::json& h, const char* key, double fallback) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", h.value(key, fallback));
  return buf;
}

}  // namespace

std::string algorithm_label(const ModelSpec& spec, const nlohmann::json& h) {
  const auto& t = spec.type;
  if (t == "ridge" || t == "lasso") return spec.algorithm + " (alpha=" + num(h, "alpha", 0.01) + ")";
  if (t == "mlp") {
    return spec.algorithm + " (hidden layers=" + std::to_string(h.value("hidden_layers", 13)) +
           ", width=" + std::to_string(h.value("width", 32)) + ", relu)";
  }
  if (t == "cnn1d") {
    return spec.algorithm + " (filters=" + std::to_string(h.value("filters", 64)) +
           ", kernel size=" + std::to_string(h.value("kernel_size", 2)) +
           ", max pooling=" + std::to_string(h.value("pool", 2)) + ")";
  }
  if (t == "lstm") {
    return spec.algorithm + " (units=" + std::to_string(h.value("units", 50)) +
           ", lookback=" + std::to_string(h.value("lookback", 1)) + ", linear head)";
  }
  return spec.algorithm;
}

std::unique_ptr<Regressor> make_regressor(const std::string& type, const nlohmann::json& hp) {
  if (type == "ols" || type == "ridge" || type == "lasso" || type == "bayesian_ridge" || type == "huber")
    return std::make_unique<linear::LinearRegressor>(type, hp);
  if (type == "bagging") return std::make_unique<tree::EnsembleRegressor>(tree::EnsembleKind::Bagging, hp);
  if (type == "random_forest")
    return std::make_unique<tree::EnsembleRegressor>(tree::EnsembleKind::RandomForest, hp);
  if (type == "adaboost_r2") return std::make_unique<tree::EnsembleRegressor>(tree::EnsembleKind::AdaBoostR2, hp);
  if (type == "svr") return std::make_unique<svr::SvrRegressor>(hp);
  if (type == "mlp" || type == "cnn1d" || type == "lstm")
    return std::make_unique<nn::NeuralRegressor>(nn::parse_network_kind(type), hp);
  throw Error(ErrorKind::InvalidArgument, "unknown model type '" + type + "'");
}

void save_model(const Regressor& model, const std::filesystem::path& dir, const std::string& id) {
  std::filesystem::create_directories(dir);
  if (const auto* net = dynamic_cast<const nn::NeuralRegressor*>(&model)) {
    net->save(dir / id);
    return;
  }
  const auto path = dir / (id + ".json");
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << model.to_json().dump() << "\n";
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

std::unique_ptr<Regressor> load_model(const std::filesystem::path& dir, const std::string& id) {
  const auto path = dir / (id + ".json");
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::NotFitted, id + " has no stored model in " + dir.string());
  std::ifstream in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
  const auto type = j.at("model_type").get<std::string>();
  if (type == "mlp" || type == "cnn1d" || type == "lstm") {
    auto net = nn::NeuralRegressor::load(path);
    if (!net->fitted()) throw Error(ErrorKind::NotFitted, id + " was stored before fitting");
    return net;
  }
  if (type == "svr") return svr::SvrRegressor::from_json(j);
  if (type == "bagging" || type == "random_forest" || type == "adaboost_r2")
    return tree::EnsembleRegressor::from_json(j);
  return linear::LinearRegressor::from_json(j);
}

}  // namespace windbench::models
