#pragma once

// Mini-batch training and finite-difference gradient checking for LayerStack.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "windbench/nn.hpp"

namespace windbench::nn {

enum class Optimizer { Sgd, Adam };
std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view s);

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t batch_size = 32;
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  /// Multiplier applied to the loss to report `mse` in original target units
  /// when the targets were scaled before training.
  double target_scale = 1.0;

  void validate() const;
  [[nodiscard]] nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochTrace {
  std::vector<double> loss;  // mean training loss over the epoch's batches, per sample
  std::vector<double> mse;   // same quantity in original target units

  [[nodiscard]] std::size_t size() const { return loss.size(); }
  void write_csv(const std::filesystem::path& path) const;
  static EpochTrace read_csv(const std::filesystem::path& path);
};

/// Raised when the loss becomes NaN or infinite; carries the epochs completed so far.
class DivergedLoss : public Error {
 public:
  DivergedLoss(const std::string& what, EpochTrace trace)
      : Error(ErrorKind::DivergedLoss, what), trace_(std::move(trace)) {}
  [[nodiscard]] const EpochTrace& trace() const { return trace_; }

 private:
  EpochTrace trace_;
};

/// Fits `stack` in place on samples X (rows) and targets Y (rows, one column per
/// output) by minimizing the mean squared error.
EpochTrace train(LayerStack& stack, const Matrix& X, const Matrix& Y, const TrainConfig& config);

struct GradCheckEntry {
  std::string where;  // "layer 2 param 17" or "input 3,0"
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  GradCheckEntry worst;
  std::size_t checked = 0;
  /// Coordinates skipped because a +-step perturbation changed a relu mask or
  /// pooling argmax.
  std::vector<std::string> excluded;
};

/// Compares backward() against central differences of
///   L = (1/B) sum ||stack(x_b) - target_b||^2
/// for every parameter and every input entry. x: in x B, target: out x B.
GradCheckReport gradient_check(LayerStack& stack, const Matrix& x, const Matrix& target, double step = 1e-6,
                               bool include_inputs = true);

/// Relative error used by gradient_check: |a - n| / max(|a|, |n|, 1e-8).
double grad_rel_error(double analytic, double numeric);

}  // namespace windbench::nn
