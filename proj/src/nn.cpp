#include "windbench/nn.hpp"

#include <cmath>

namespace windbench::nn {

namespace {

using Idx = Eigen::Index;

Idx ix(std::size_t v) { return static_cast<Idx>(v); }

void require_rows(const Matrix& x, std::size_t rows, const std::string& who) {
  if (static_cast<std::size_t>(x.rows()) != rows) {
    throw Error(ErrorKind::ShapeMismatch,
                who + " expects " + std::to_string(rows) + " input rows, got " + std::to_string(x.rows()));
  }
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::size_t get_size(const nlohmann::json& j, const char* key) { return j.at(key).get<std::size_t>(); }

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::Relu ? "relu" : "linear"; }

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::Relu;
  if (s == "linear") return Activation::Linear;
  throw Error(ErrorKind::InvalidArgument, "unknown activation '" + std::string(s) + "'");
}

std::string_view to_string(Init i) { return i == Init::He ? "he" : "normal"; }

Init parse_init(std::string_view s) {
  if (s == "he") return Init::He;
  if (s == "normal") return Init::Normal;
  throw Error(ErrorKind::InvalidArgument, "unknown initializer '" + std::string(s) + "'");
}

void Layer::switching_state(const Saved&, std::vector<std::int64_t>&) const {}

void Layer::initialize(Init, Rng&) {}

// ---------------------------------------------------------------- dense

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act) : in_(in), out_(out), act_(act) {
  if (in == 0 || out == 0) throw Error(ErrorKind::InvalidArgument, "dense layer sizes must be positive");
  params_.assign(in * out + out, 0.0);
}

Eigen::Map<Matrix> DenseLayer::weights() { return {params_.data(), ix(out_), ix(in_)}; }
Eigen::Map<const Matrix> DenseLayer::weights() const { return {params_.data(), ix(out_), ix(in_)}; }
Eigen::Map<Vector> DenseLayer::bias() { return {params_.data() + in_ * out_, ix(out_)}; }
Eigen::Map<const Vector> DenseLayer::bias() const { return {params_.data() + in_ * out_, ix(out_)}; }

Matrix DenseLayer::forward(const Matrix& x, Saved* saved) const {
  require_rows(x, in_, "dense");
  Matrix z = weights() * x;
  z.colwise() += bias();
  if (saved) *saved = {x, z};
  if (act_ == Activation::Relu) return z.cwiseMax(0.0);
  return z;
}

Matrix DenseLayer::backward(const Matrix& grad_out, const Saved& saved, std::span<double> param_grad) const {
  const Matrix& x = saved[0];
  const Matrix& z = saved[1];
  Matrix gz = grad_out;
  if (act_ == Activation::Relu) gz = (z.array() > 0.0).select(grad_out, 0.0);
  Eigen::Map<Matrix> gW(param_grad.data(), ix(out_), ix(in_));
  Eigen::Map<Vector> gc(param_grad.data() + in_ * out_, ix(out_));
  gW.noalias() += gz * x.transpose();
  gc += gz.rowwise().sum();
  return weights().transpose() * gz;
}

void DenseLayer::switching_state(const Saved& saved, std::vector<std::int64_t>& out) const {
  if (act_ != Activation::Relu) return;
  const Matrix& z = saved[1];
  for (Idx k = 0; k < z.size(); ++k) out.push_back(z.data()[k] > 0.0 ? 1 : 0);
}

void DenseLayer::initialize(Init init, Rng& rng) {
  const double sd = init == Init::He ? std::sqrt(2.0 / static_cast<double>(in_)) : 0.05;
  auto W = weights();
  for (Idx c = 0; c < W.cols(); ++c)
    for (Idx r = 0; r < W.rows(); ++r) W(r, c) = rng.normal(0.0, sd);
  bias().setZero();
}

nlohmann::json DenseLayer::architecture() const {
  return {{"kind", "dense"}, {"in", in_}, {"out", out_}, {"activation", to_string(act_)}};
}

// ---------------------------------------------------------------- conv1d

Conv1dLayer::Conv1dLayer(std::size_t length, std::size_t channels, std::size_t filters, std::size_t kernel,
                         Activation act)
    : length_(length), channels_(channels), filters_(filters), kernel_(kernel), act_(act) {
  if (channels == 0 || filters == 0 || kernel == 0)
    throw Error(ErrorKind::InvalidArgument, "conv1d sizes must be positive");
  if (length < kernel) {
    throw Error(ErrorKind::SequenceTooShort, "sequence length " + std::to_string(length) +
                                                 " is shorter than kernel size " + std::to_string(kernel));
  }
  params_.assign(filters * kernel * channels + filters, 0.0);
}

Matrix Conv1dLayer::forward(const Matrix& x, Saved* saved) const {
  require_rows(x, in_size(), "conv1d");
  const std::size_t patch = kernel_ * channels_;
  Eigen::Map<const Matrix> W(params_.data(), ix(filters_), ix(patch));
  Eigen::Map<const Vector> b(params_.data() + filters_ * patch, ix(filters_));
  Matrix z(ix(out_size()), x.cols());
  for (std::size_t t = 0; t < out_length(); ++t) {
    auto blk = z.middleRows(ix(t * filters_), ix(filters_));
    blk.noalias() = W * x.middleRows(ix(t * channels_), ix(patch));
    blk.colwise() += b;
  }
  if (saved) *saved = {x, z};
  if (act_ == Activation::Relu) return z.cwiseMax(0.0);
  return z;
}

Matrix Conv1dLayer::backward(const Matrix& grad_out, const Saved& saved, std::span<double> param_grad) const {
  const Matrix& x = saved[0];
  const Matrix& z = saved[1];
  Matrix gz = grad_out;
  if (act_ == Activation::Relu) gz = (z.array() > 0.0).select(grad_out, 0.0);
  const std::size_t patch = kernel_ * channels_;
  Eigen::Map<const Matrix> W(params_.data(), ix(filters_), ix(patch));
  Eigen::Map<Matrix> gW(param_grad.data(), ix(filters_), ix(patch));
  Eigen::Map<Vector> gb(param_grad.data() + filters_ * patch, ix(filters_));
  Matrix gx = Matrix::Zero(x.rows(), x.cols());
  for (std::size_t t = 0; t < out_length(); ++t) {
    const auto g = gz.middleRows(ix(t * filters_), ix(filters_));
    gW.noalias() += g * x.middleRows(ix(t * channels_), ix(patch)).transpose();
    gb += g.rowwise().sum();
    gx.middleRows(ix(t * channels_), ix(patch)).noalias() += W.transpose() * g;
  }
  return gx;
}

void Conv1dLayer::switching_state(const Saved& saved, std::vector<std::int64_t>& out) const {
  if (act_ != Activation::Relu) return;
  const Matrix& z = saved[1];
  for (Idx k = 0; k < z.size(); ++k) out.push_back(z.data()[k] > 0.0 ? 1 : 0);
}

void Conv1dLayer::initialize(Init init, Rng& rng) {
  const std::size_t patch = kernel_ * channels_;
  const double sd = init == Init::He ? std::sqrt(2.0 / static_cast<double>(patch)) : 0.05;
  for (std::size_t k = 0; k < filters_ * patch; ++k) params_[k] = rng.normal(0.0, sd);
  std::fill(params_.begin() + static_cast<std::ptrdiff_t>(filters_ * patch), params_.end(), 0.0);
}

nlohmann::json Conv1dLayer::architecture() const {
  return {{"kind", "conv1d"},   {"length", length_}, {"channels", channels_},
          {"filters", filters_}, {"kernel", kernel_}, {"activation", to_string(act_)}};
}

// ---------------------------------------------------------------- max pool

MaxPool1dLayer::MaxPool1dLayer(std::size_t length, std::size_t channels, std::size_t pool)
    : length_(length), channels_(channels), pool_(pool) {
  if (channels == 0 || pool == 0) throw Error(ErrorKind::InvalidArgument, "maxpool sizes must be positive");
  if (length < pool) {
    throw Error(ErrorKind::SequenceTooShort, "sequence length " + std::to_string(length) +
                                                 " is shorter than pool size " + std::to_string(pool));
  }
}

Matrix MaxPool1dLayer::forward(const Matrix& x, Saved* saved) const {
  require_rows(x, in_size(), "maxpool1d");
  const std::size_t L = out_length();
  Matrix y(ix(L * channels_), x.cols());
  Matrix arg(y.rows(), y.cols());
  for (Idx col = 0; col < x.cols(); ++col) {
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t c = 0; c < channels_; ++c) {
        Idx best = ix(t * pool_ * channels_ + c);
        for (std::size_t k = 1; k < pool_; ++k) {
          const Idx r = ix((t * pool_ + k) * channels_ + c);
          if (x(r, col) > x(best, col)) best = r;  // first maximum wins ties
        }
        y(ix(t * channels_ + c), col) = x(best, col);
        arg(ix(t * channels_ + c), col) = static_cast<double>(best);
      }
    }
  }
  if (saved) *saved = {std::move(arg)};
  return y;
}

Matrix MaxPool1dLayer::backward(const Matrix& grad_out, const Saved& saved, std::span<double>) const {
  const Matrix& arg = saved[0];
  Matrix gx = Matrix::Zero(ix(in_size()), grad_out.cols());
  for (Idx col = 0; col < grad_out.cols(); ++col)
    for (Idx r = 0; r < grad_out.rows(); ++r) gx(static_cast<Idx>(arg(r, col)), col) += grad_out(r, col);
  return gx;
}

void MaxPool1dLayer::switching_state(const Saved& saved, std::vector<std::int64_t>& out) const {
  const Matrix& arg = saved[0];
  for (Idx k = 0; k < arg.size(); ++k) out.push_back(static_cast<std::int64_t>(arg.data()[k]));
}

nlohmann::json MaxPool1dLayer::architecture() const {
  return {{"kind", "maxpool1d"}, {"length", length_}, {"channels", channels_}, {"pool", pool_}};
}

nlohmann::json FlattenLayer::architecture() const { return {{"kind", "flatten"}, {"size", size_}}; }

// ---------------------------------------------------------------- lstm

LstmLayer::LstmLayer(std::size_t steps, std::size_t features, std::size_t units)
    : steps_(steps), features_(features), units_(units) {
  if (steps == 0) throw Error(ErrorKind::SequenceTooShort, "lstm needs at least one time step");
  if (features == 0 || units == 0) throw Error(ErrorKind::InvalidArgument, "lstm sizes must be positive");
  params_.assign(4 * units * features + 4 * units * units + 4 * units, 0.0);
}

Eigen::Map<Matrix> LstmLayer::W() { return {params_.data(), ix(4 * units_), ix(features_)}; }
Eigen::Map<const Matrix> LstmLayer::W() const { return {params_.data(), ix(4 * units_), ix(features_)}; }
Eigen::Map<Matrix> LstmLayer::U() {
  return {params_.data() + 4 * units_ * features_, ix(4 * units_), ix(units_)};
}
Eigen::Map<const Matrix> LstmLayer::U() const {
  return {params_.data() + 4 * units_ * features_, ix(4 * units_), ix(units_)};
}
Eigen::Map<Vector> LstmLayer::b() {
  return {params_.data() + 4 * units_ * (features_ + units_), ix(4 * units_)};
}
Eigen::Map<const Vector> LstmLayer::b() const {
  return {params_.data() + 4 * units_ * (features_ + units_), ix(4 * units_)};
}

LstmStepResult lstm_step(const LstmLayer& cell, const Matrix& x, const Matrix& h_prev, const Matrix& c_prev) {
  const Idx h = ix(cell.units());
  require_rows(x, cell.features(), "lstm_step x");
  require_rows(h_prev, cell.units(), "lstm_step h_prev");
  require_rows(c_prev, cell.units(), "lstm_step c_prev");
  if (h_prev.cols() != x.cols() || c_prev.cols() != x.cols())
    throw Error(ErrorKind::ShapeMismatch, "lstm_step batch sizes differ");

  LstmStepResult r;
  auto& k = r.cache;
  k.pre.noalias() = cell.W() * x;
  k.pre.noalias() += cell.U() * h_prev;
  k.pre.colwise() += cell.b();
  auto gate = [&](Gate g) { return k.pre.middleRows(static_cast<Idx>(g) * h, h); };
  k.f = gate(Gate::Forget).unaryExpr([](double z) { return sigmoid(z); });
  k.i = gate(Gate::Input).unaryExpr([](double z) { return sigmoid(z); });
  k.o = gate(Gate::Output).unaryExpr([](double z) { return sigmoid(z); });
  k.g = gate(Gate::Cell).array().tanh().matrix();
  if (cell.hooks().forget) k.f.setConstant(*cell.hooks().forget);
  if (cell.hooks().input) k.i.setConstant(*cell.hooks().input);
  k.c = (k.f.array() * c_prev.array() + k.i.array() * k.g.array()).matrix();
  k.tanh_c = k.c.array().tanh().matrix();
  r.h = (k.o.array() * k.tanh_c.array()).matrix();
  r.c = k.c;
  return r;
}

// Saved layout: [x, then per step t: h_t, c_t, f, i, o, g, tanh_c].
namespace {
constexpr std::size_t kPerStep = 7;
}

Matrix LstmLayer::forward(const Matrix& x, Saved* saved) const {
  require_rows(x, in_size(), "lstm");
  const Idx B = x.cols();
  Matrix h = Matrix::Zero(ix(units_), B);
  Matrix c = Matrix::Zero(ix(units_), B);
  if (saved) {
    saved->clear();
    saved->reserve(1 + kPerStep * steps_);
    saved->push_back(x);
  }
  for (std::size_t t = 0; t < steps_; ++t) {
    auto r = lstm_step(*this, x.middleRows(ix(t * features_), ix(features_)), h, c);
    h = std::move(r.h);
    c = std::move(r.c);
    if (saved) {
      auto& k = r.cache;
      saved->push_back(h);
      saved->push_back(c);
      saved->push_back(std::move(k.f));
      saved->push_back(std::move(k.i));
      saved->push_back(std::move(k.o));
      saved->push_back(std::move(k.g));
      saved->push_back(std::move(k.tanh_c));
    }
  }
  return h;
}

Matrix LstmLayer::backward(const Matrix& grad_out, const Saved& saved, std::span<double> param_grad) const {
  const Matrix& x = saved[0];
  const Idx B = x.cols();
  const Idx h = ix(units_);
  const Idx d = ix(features_);
  Eigen::Map<Matrix> gW(param_grad.data(), 4 * h, d);
  Eigen::Map<Matrix> gU(param_grad.data() + 4 * units_ * features_, 4 * h, h);
  Eigen::Map<Vector> gb(param_grad.data() + 4 * units_ * (features_ + units_), 4 * h);

  const Matrix zero = Matrix::Zero(h, B);
  Matrix gx(x.rows(), B);
  Matrix dh = grad_out;
  Matrix dc = Matrix::Zero(h, B);
  Matrix dpre(4 * h, B);
  for (std::size_t s = steps_; s-- > 0;) {
    const std::size_t base = 1 + kPerStep * s;
    const Matrix& f = saved[base + 2];
    const Matrix& i = saved[base + 3];
    const Matrix& o = saved[base + 4];
    const Matrix& g = saved[base + 5];
    const Matrix& tc = saved[base + 6];
    const Matrix& h_prev = s > 0 ? saved[base - kPerStep] : zero;
    const Matrix& c_prev = s > 0 ? saved[base - kPerStep + 1] : zero;

    dc.array() += dh.array() * o.array() * (1.0 - tc.array().square());
    auto df = dpre.middleRows(0, h);
    auto di = dpre.middleRows(h, h);
    auto d_o = dpre.middleRows(2 * h, h);
    auto dg = dpre.middleRows(3 * h, h);
    if (hooks_.forget) df.setZero();
    else df = (dc.array() * c_prev.array() * f.array() * (1.0 - f.array())).matrix();
    if (hooks_.input) di.setZero();
    else di = (dc.array() * g.array() * i.array() * (1.0 - i.array())).matrix();
    d_o = (dh.array() * tc.array() * o.array() * (1.0 - o.array())).matrix();
    dg = (dc.array() * i.array() * (1.0 - g.array().square())).matrix();

    const auto xt = x.middleRows(ix(s * features_), d);
    gW.noalias() += dpre * xt.transpose();
    gU.noalias() += dpre * h_prev.transpose();
    gb += dpre.rowwise().sum();
    gx.middleRows(ix(s * features_), d).noalias() = W().transpose() * dpre;
    dh.noalias() = U().transpose() * dpre;
    dc = (dc.array() * f.array()).matrix();
  }
  return gx;
}

void LstmLayer::initialize(Init init, Rng& rng) {
  const double sd = init == Init::He ? std::sqrt(2.0 / static_cast<double>(features_ + units_)) : 0.05;
  const std::size_t nw = 4 * units_ * (features_ + units_);
  for (std::size_t k = 0; k < nw; ++k) params_[k] = rng.normal(0.0, sd);
  auto bias = b();
  bias.setZero();
  bias.segment(static_cast<Idx>(Gate::Forget) * ix(units_), ix(units_)).setOnes();
}

nlohmann::json LstmLayer::architecture() const {
  return {{"kind", "lstm"}, {"steps", steps_}, {"features", features_}, {"units", units_}};
}

// ---------------------------------------------------------------- stack

LayerStack::LayerStack(const LayerStack& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

LayerStack& LayerStack::operator=(const LayerStack& other) {
  if (this != &other) {
    LayerStack tmp(other);
    layers_ = std::move(tmp.layers_);
  }
  return *this;
}

void LayerStack::add(std::unique_ptr<Layer> layer) {
  if (!layers_.empty() && layers_.back()->out_size() != layer->in_size()) {
    throw Error(ErrorKind::ShapeMismatch, layer->kind() + " layer expects " + std::to_string(layer->in_size()) +
                                              " inputs but previous layer emits " +
                                              std::to_string(layers_.back()->out_size()));
  }
  layers_.push_back(std::move(layer));
}

std::size_t LayerStack::in_size() const { return layers_.empty() ? 0 : layers_.front()->in_size(); }
std::size_t LayerStack::out_size() const { return layers_.empty() ? 0 : layers_.back()->out_size(); }

std::size_t LayerStack::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->param_count();
  return n;
}

Matrix LayerStack::forward(const Matrix& x) const {
  Matrix a = x;
  for (const auto& l : layers_) a = l->forward(a, nullptr);
  return a;
}

Matrix LayerStack::forward(const Matrix& x, Tape& tape) const {
  tape.saved.assign(layers_.size(), {});
  Matrix a = x;
  for (std::size_t k = 0; k < layers_.size(); ++k) a = layers_[k]->forward(a, &tape.saved[k]);
  return a;
}

LayerStack::Grads LayerStack::zero_grads() const {
  Grads g;
  g.reserve(layers_.size());
  for (const auto& l : layers_) g.emplace_back(l->param_count(), 0.0);
  return g;
}

Matrix LayerStack::backward(const Matrix& grad_out, const Tape& tape, Grads& grads) const {
  Matrix g = grad_out;
  for (std::size_t k = layers_.size(); k-- > 0;) g = layers_[k]->backward(g, tape.saved[k], grads[k]);
  return g;
}

std::vector<std::int64_t> LayerStack::switching_state(const Tape& tape) const {
  std::vector<std::int64_t> out;
  for (std::size_t k = 0; k < layers_.size(); ++k) layers_[k]->switching_state(tape.saved[k], out);
  return out;
}

void LayerStack::initialize(Init init, Rng& rng) {
  for (auto& l : layers_) l->initialize(init, rng);
}

nlohmann::json LayerStack::architecture() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : layers_) arr.push_back(l->architecture());
  return arr;
}

LayerStack LayerStack::from_architecture(const nlohmann::json& arch) {
  if (!arch.is_array()) throw Error(ErrorKind::Format, "architecture must be an array of layer records");
  LayerStack s;
  for (const auto& rec : arch) {
    const auto kind = rec.at("kind").get<std::string>();
    if (kind == "dense") {
      s.emplace<DenseLayer>(get_size(rec, "in"), get_size(rec, "out"),
                            parse_activation(rec.at("activation").get<std::string>()));
    } else if (kind == "conv1d") {
      s.emplace<Conv1dLayer>(get_size(rec, "length"), get_size(rec, "channels"), get_size(rec, "filters"),
                             get_size(rec, "kernel"), parse_activation(rec.at("activation").get<std::string>()));
    } else if (kind == "maxpool1d") {
      s.emplace<MaxPool1dLayer>(get_size(rec, "length"), get_size(rec, "channels"), get_size(rec, "pool"));
    } else if (kind == "flatten") {
      s.emplace<FlattenLayer>(get_size(rec, "size"));
    } else if (kind == "lstm") {
      s.emplace<LstmLayer>(get_size(rec, "steps"), get_size(rec, "features"), get_size(rec, "units"));
    } else {
      throw Error(ErrorKind::Format, "unknown layer kind '" + kind + "'");
    }
  }
  return s;
}

}  // namespace windbench::nn
