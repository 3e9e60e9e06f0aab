#pragma once

// The twelve benchmarked models: ids, display names, construction and storage.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "windbench/regressor.hpp"

namespace windbench::models {

struct ModelSpec {
  std::string id;         // "Model-1" ... "Model-12"
  std::string algorithm;  // display name
  std::string type;       // regressor model_type
  bool deep = false;
};

/// All models in report order.
const std::vector<ModelSpec>& roster();
/// Throws Usage for an unknown id.
const ModelSpec& find(const std::string& id);
/// Position in roster(); throws Usage for an unknown id.
std::size_t index_of(const std::string& id);

/// Display name including the hyperparameters the comparison table shows.
std::string algorithm_label(const ModelSpec& spec, const nlohmann::json& hyperparams);

std::unique_ptr<Regressor> make_regressor(const std::string& type, const nlohmann::json& hyperparams);

/// Writes <dir>/<id>.json; network models also write parameter and trace files.
void save_model(const Regressor& model, const std::filesystem::path& dir, const std::string& id);
/// Throws NotFitted when no stored model exists for `id`.
std::unique_ptr<Regressor> load_model(const std::filesystem::path& dir, const std::string& id);

}  // namespace windbench::models
