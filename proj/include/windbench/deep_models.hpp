#pragma once

// The three network regressors: a deep MLP, a 1-D CNN and an LSTM.

#include <filesystem>
#include <memory>
#include <string>

#include "windbench/nn_train.hpp"
#include "windbench/regressor.hpp"

namespace windbench::nn {

/// `hidden_layers` relu Dense layers of `width`, then a linear Dense(1).
LayerStack build_mlp(std::size_t d_in, std::size_t hidden_layers = 13, std::size_t width = 32,
                     Activation activation = Activation::Relu);

/// Treats the d_in features as a length-d_in single-channel sequence:
/// Conv1d(filters, kernel, relu) -> MaxPool1d(pool) -> Flatten -> Dense(dense_width, relu) -> Dense(1).
LayerStack build_cnn1d(std::size_t d_in, std::size_t filters = 64, std::size_t kernel_size = 2,
                       std::size_t pool = 2, std::size_t dense_width = 50);

/// LSTM(units) over `steps` time steps of `features` inputs, then a linear Dense(1) head.
LayerStack build_lstm(std::size_t steps, std::size_t features, std::size_t units = 50);

enum class NetworkKind { Mlp, Cnn1d, Lstm };
std::string_view to_string(NetworkKind k);
NetworkKind parse_network_kind(std::string_view s);

/// Little-endian parameter file: "WBNN", u32 version, u64 tensor count, then per
/// tensor u64 name length, name bytes, u64 value count, fp64 values.
void write_parameters(const std::filesystem::path& path, const LayerStack& stack);
void read_parameters(const std::filesystem::path& path, LayerStack& stack);

/// Network regressor. Targets are standardized internally before training and
/// predictions mapped back; inputs are used as given. For the LSTM, X rows hold
/// `lookback` consecutive feature vectors, oldest first.
class NeuralRegressor final : public Regressor {
 public:
  NeuralRegressor(NetworkKind kind, nlohmann::json hyperparams);

  [[nodiscard]] std::string model_type() const override;
  void fit(const Matrix& X, const Vector& y) override;
  [[nodiscard]] Vector predict(const Matrix& X) const override;
  [[nodiscard]] bool fitted() const override { return fitted_; }
  /// Manifest: architecture, hyperparameters, target scaling. Parameters are
  /// stored separately with save().
  [[nodiscard]] nlohmann::json to_json() const override;

  /// Writes <stem>.json, <stem>.params.bin and <stem>.trace.csv next to each other.
  void save(const std::filesystem::path& stem) const;
  static std::unique_ptr<NeuralRegressor> load(const std::filesystem::path& manifest_path);

  [[nodiscard]] NetworkKind kind() const { return kind_; }
  [[nodiscard]] const LayerStack& stack() const { return stack_; }
  [[nodiscard]] const EpochTrace& trace() const { return trace_; }
  [[nodiscard]] const TrainConfig& train_config() const { return config_; }
  [[nodiscard]] std::size_t lookback() const { return lookback_; }

 private:
  LayerStack build(std::size_t d_in) const;

  NetworkKind kind_;
  nlohmann::json hyperparams_;
  TrainConfig config_;
  std::size_t lookback_ = 1;
  LayerStack stack_;
  EpochTrace trace_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  bool fitted_ = false;
};

}  // namespace windbench::nn
