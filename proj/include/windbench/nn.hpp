#pragma once

// Minimal neural layers with hand-written backward passes.
//
// Activations are column-batched: a Matrix of shape (features x batch).
// Sequence-shaped activations are flattened position-major, i.e. element
// (t, c) of a (length x channels) signal lives at row t * channels + c.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "windbench/common.hpp"

namespace windbench::nn {

enum class Activation { Linear, Relu };
std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

enum class Init { Normal, He };
std::string_view to_string(Init i);
Init parse_init(std::string_view s);

/// Values a layer keeps from forward() for its backward() call.
using Saved = std::vector<Matrix>;

class Layer {
 public:
  virtual ~Layer() = default;

  [[nodiscard]] virtual std::string kind() const = 0;
  [[nodiscard]] virtual std::size_t in_size() const = 0;
  [[nodiscard]] virtual std::size_t out_size() const = 0;

  /// x: in_size() x batch. `saved` may be null when no backward pass follows.
  [[nodiscard]] virtual Matrix forward(const Matrix& x, Saved* saved) const = 0;
  /// Accumulates (+=) parameter gradients into `param_grad` and returns the
  /// gradient with respect to the layer input.
  [[nodiscard]] virtual Matrix backward(const Matrix& grad_out, const Saved& saved,
                                        std::span<double> param_grad) const = 0;

  /// Discrete state of piecewise-linear units (relu masks, pooling argmax).
  /// Finite differences are only meaningful while this state is unchanged.
  virtual void switching_state(const Saved& saved, std::vector<std::int64_t>& out) const;

  virtual void initialize(Init init, Rng& rng);

  [[nodiscard]] virtual nlohmann::json architecture() const = 0;
  [[nodiscard]] virtual std::unique_ptr<Layer> clone() const = 0;

  [[nodiscard]] std::span<double> params() { return params_; }
  [[nodiscard]] std::span<const double> params() const { return params_; }
  [[nodiscard]] std::size_t param_count() const { return params_.size(); }

 protected:
  std::vector<double> params_;
};

/// out = g(W x + c), W: out x in (column-major in params, then c).
class DenseLayer final : public Layer {
 public:
  DenseLayer(std::size_t in, std::size_t out, Activation act);

  [[nodiscard]] std::string kind() const override { return "dense"; }
  [[nodiscard]] std::size_t in_size() const override { return in_; }
  [[nodiscard]] std::size_t out_size() const override { return out_; }
  [[nodiscard]] Matrix forward(const Matrix& x, Saved* saved) const override;
  [[nodiscard]] Matrix backward(const Matrix& grad_out, const Saved& saved,
                                std::span<double> param_grad) const override;
  void switching_state(const Saved& saved, std::vector<std::int64_t>& out) const override;
  void initialize(Init init, Rng& rng) override;
  [[nodiscard]] nlohmann::json architecture() const override;
  [[nodiscard]] std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }

  [[nodiscard]] Eigen::Map<Matrix> weights();
  [[nodiscard]] Eigen::Map<const Matrix> weights() const;
  [[nodiscard]] Eigen::Map<Vector> bias();
  [[nodiscard]] Eigen::Map<const Vector> bias() const;
  [[nodiscard]] Activation activation() const { return act_; }

 private:
  std::size_t in_, out_;
  Activation act_;
};

/// Valid 1-D convolution over a (length x channels) input with relu or linear
/// output; weights are filters x (kernel * channels) with column k * channels + c.
class Conv1dLayer final : public Layer {
 public:
  Conv1dLayer(std::size_t length, std::size_t channels, std::size_t filters, std::size_t kernel, Activation act);

  [[nodiscard]] std::string kind() const override { return "conv1d"; }
  [[nodiscard]] std::size_t in_size() const override { return length_ * channels_; }
  [[nodiscard]] std::size_t out_size() const override { return out_length() * filters_; }
  [[nodiscard]] std::size_t out_length() const { return length_ - kernel_ + 1; }
  [[nodiscard]] std::size_t filters() const { return filters_; }
  [[nodiscard]] Matrix forward(const Matrix& x, Saved* saved) const override;
  [[nodiscard]] Matrix backward(const Matrix& grad_out, const Saved& saved,
                                std::span<double> param_grad) const override;
  void switching_state(const Saved& saved, std::vector<std::int64_t>& out) const override;
  void initialize(Init init, Rng& rng) override;
  [[nodiscard]] nlohmann::json architecture() const override;
  [[nodiscard]] std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv1dLayer>(*this); }

 private:
  std::size_t length_, channels_, filters_, kernel_;
  Activation act_;
};

/// Non-overlapping max pooling along the length axis; output length floor(L / pool).
class MaxPool1dLayer final : public Layer {
 public:
  MaxPool1dLayer(std::size_t length, std::size_t channels, std::size_t pool);

  [[nodiscard]] std::string kind() const override { return "maxpool1d"; }
  [[nodiscard]] std::size_t in_size() const override { return length_ * channels_; }
  [[nodiscard]] std::size_t out_size() const override { return out_length() * channels_; }
  [[nodiscard]] std::size_t out_length() const { return length_ / pool_; }
  [[nodiscard]] Matrix forward(const Matrix& x, Saved* saved) const override;
  [[nodiscard]] Matrix backward(const Matrix& grad_out, const Saved& saved,
                                std::span<double> param_grad) const override;
  void switching_state(const Saved& saved, std::vector<std::int64_t>& out) const override;
  [[nodiscard]] nlohmann::json architecture() const override;
  [[nodiscard]] std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool1dLayer>(*this); }

 private:
  std::size_t length_, channels_, pool_;
};

/// Identity on the flat representation; kept as its own record so stored
/// architectures list it explicitly.
class FlattenLayer final : public Layer {
 public:
  explicit FlattenLayer(std::size_t size) : size_(size) {}

  [[nodiscard]] std::string kind() const override { return "flatten"; }
  [[nodiscard]] std::size_t in_size() const override { return size_; }
  [[nodiscard]] std::size_t out_size() const override { return size_; }
  [[nodiscard]] Matrix forward(const Matrix& x, Saved*) const override { return x; }
  [[nodiscard]] Matrix backward(const Matrix& grad_out, const Saved&, std::span<double>) const override {
    return grad_out;
  }
  [[nodiscard]] nlohmann::json architecture() const override;
  [[nodiscard]] std::unique_ptr<Layer> clone() const override { return std::make_unique<FlattenLayer>(*this); }

 private:
  std::size_t size_;
};

enum class Gate { Forget = 0, Input = 1, Output = 2, Cell = 3 };

/// Test hook: replace a gate's activation with a constant.
struct LstmHooks {
  std::optional<double> forget;
  std::optional<double> input;
};

/// Per-step values kept for backpropagation through time.
struct LstmStepCache {
  Matrix pre;  // 4h x batch pre-activations, gate blocks in Gate order
  Matrix f, i, o, g;
  Matrix c;    // new cell state
  Matrix tanh_c;
};

struct LstmStepResult {
  Matrix h;
  Matrix c;
  LstmStepCache cache;
};

/// LSTM over a (steps x features) input returning the last hidden state.
///   f = sigmoid(W_f x + U_f h + b_f)     i = sigmoid(W_i x + U_i h + b_i)
///   o = sigmoid(W_o x + U_o h + b_o)     g = tanh(W_c x + U_c h + b_c)
///   c' = f * c + i * g                    h' = o * tanh(c')
/// Parameters: W (4h x d), U (4h x h), b (4h), gate rows in Gate order.
class LstmLayer final : public Layer {
 public:
  LstmLayer(std::size_t steps, std::size_t features, std::size_t units);

  [[nodiscard]] std::string kind() const override { return "lstm"; }
  [[nodiscard]] std::size_t in_size() const override { return steps_ * features_; }
  [[nodiscard]] std::size_t out_size() const override { return units_; }
  [[nodiscard]] std::size_t steps() const { return steps_; }
  [[nodiscard]] std::size_t features() const { return features_; }
  [[nodiscard]] std::size_t units() const { return units_; }

  [[nodiscard]] Matrix forward(const Matrix& x, Saved* saved) const override;
  [[nodiscard]] Matrix backward(const Matrix& grad_out, const Saved& saved,
                                std::span<double> param_grad) const override;
  void initialize(Init init, Rng& rng) override;
  [[nodiscard]] nlohmann::json architecture() const override;
  [[nodiscard]] std::unique_ptr<Layer> clone() const override { return std::make_unique<LstmLayer>(*this); }

  [[nodiscard]] Eigen::Map<Matrix> W();
  [[nodiscard]] Eigen::Map<const Matrix> W() const;
  [[nodiscard]] Eigen::Map<Matrix> U();
  [[nodiscard]] Eigen::Map<const Matrix> U() const;
  [[nodiscard]] Eigen::Map<Vector> b();
  [[nodiscard]] Eigen::Map<const Vector> b() const;

  void set_hooks(LstmHooks hooks) { hooks_ = hooks; }
  [[nodiscard]] const LstmHooks& hooks() const { return hooks_; }

 private:
  std::size_t steps_, features_, units_;
  LstmHooks hooks_;
};

/// One cell update. x: d x batch, h_prev and c_prev: h x batch.
LstmStepResult lstm_step(const LstmLayer& cell, const Matrix& x, const Matrix& h_prev, const Matrix& c_prev);

/// Sequential container. Copying deep-copies every layer.
class LayerStack {
 public:
  LayerStack() = default;
  LayerStack(const LayerStack& other);
  LayerStack& operator=(const LayerStack& other);
  LayerStack(LayerStack&&) noexcept = default;
  LayerStack& operator=(LayerStack&&) noexcept = default;

  /// Throws ShapeMismatch when the layer input does not match the current output.
  void add(std::unique_ptr<Layer> layer);
  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    add(std::move(layer));
    return ref;
  }

  [[nodiscard]] std::size_t size() const { return layers_.size(); }
  [[nodiscard]] Layer& layer(std::size_t i) { return *layers_[i]; }
  [[nodiscard]] const Layer& layer(std::size_t i) const { return *layers_[i]; }
  [[nodiscard]] std::size_t in_size() const;
  [[nodiscard]] std::size_t out_size() const;
  [[nodiscard]] std::size_t parameter_count() const;

  struct Tape {
    std::vector<Saved> saved;
  };
  using Grads = std::vector<std::vector<double>>;

  [[nodiscard]] Matrix forward(const Matrix& x) const;
  [[nodiscard]] Matrix forward(const Matrix& x, Tape& tape) const;
  /// Zero-initialized gradient buffers matching every layer's parameters.
  [[nodiscard]] Grads zero_grads() const;
  /// Returns the gradient with respect to the stack input.
  Matrix backward(const Matrix& grad_out, const Tape& tape, Grads& grads) const;

  [[nodiscard]] std::vector<std::int64_t> switching_state(const Tape& tape) const;

  void initialize(Init init, Rng& rng);
  [[nodiscard]] nlohmann::json architecture() const;
  static LayerStack from_architecture(const nlohmann::json& arch);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace windbench::nn
