#include "windbench/deep_models.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace windbench::nn {

static_assert(std::endian::native == std::endian::little, "parameter files assume a little-endian host");

LayerStack build_mlp(std::size_t d_in, std::size_t hidden_layers, std::size_t width, Activation activation) {
  if (d_in == 0) throw Error(ErrorKind::InvalidArgument, "mlp needs at least one input");
  if (width == 0) throw Error(ErrorKind::InvalidArgument, "mlp width must be >= 1");
  LayerStack s;
  std::size_t in = d_in;
  for (std::size_t k = 0; k < hidden_layers; ++k) {
    s.emplace<DenseLayer>(in, width, activation);
    in = width;
  }
  s.emplace<DenseLayer>(in, 1, Activation::Linear);
  return s;
}

LayerStack build_cnn1d(std::size_t d_in, std::size_t filters, std::size_t kernel_size, std::size_t pool,
                       std::size_t dense_width) {
  if (d_in < kernel_size) {
    throw Error(ErrorKind::SequenceTooShort, "cnn input length " + std::to_string(d_in) +
                                                 " is shorter than kernel size " + std::to_string(kernel_size));
  }
  LayerStack s;
  auto& conv = s.emplace<Conv1dLayer>(d_in, 1, filters, kernel_size, Activation::Relu);
  auto& mp = s.emplace<MaxPool1dLayer>(conv.out_length(), filters, pool);
  s.emplace<FlattenLayer>(mp.out_size());
  s.emplace<DenseLayer>(mp.out_size(), dense_width, Activation::Relu);
  s.emplace<DenseLayer>(dense_width, 1, Activation::Linear);
  return s;
}

LayerStack build_lstm(std::size_t steps, std::size_t features, std::size_t units) {
  LayerStack s;
  s.emplace<LstmLayer>(steps, features, units);
  s.emplace<DenseLayer>(units, 1, Activation::Linear);
  return s;
}

std::string_view to_string(NetworkKind k) {
  switch (k) {
    case NetworkKind::Mlp: return "mlp";
    case NetworkKind::Cnn1d: return "cnn1d";
    case NetworkKind::Lstm: return "lstm";
  }
  return "?";
}

NetworkKind parse_network_kind(std::string_view s) {
  if (s == "mlp") return NetworkKind::Mlp;
  if (s == "cnn1d") return NetworkKind::Cnn1d;
  if (s == "lstm") return NetworkKind::Lstm;
  throw Error(ErrorKind::InvalidArgument, "unknown network kind '" + std::string(s) + "'");
}

namespace {

constexpr char kMagic[4] = {'W', 'B', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw Error(ErrorKind::Format, path.string() + ": truncated parameter file");
  return v;
}

}  // namespace

void write_parameters(const std::filesystem::path& path, const LayerStack& stack) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, stack.size());
  for (std::size_t l = 0; l < stack.size(); ++l) {
    const std::string name = std::to_string(l) + ":" + stack.layer(l).kind();
    put<std::uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const auto p = stack.layer(l).params();
    put<std::uint64_t>(out, p.size());
    out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

void read_parameters(const std::filesystem::path& path, LayerStack& stack) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorKind::Format, path.string() + ": not a parameter file");
  if (get<std::uint32_t>(in, path) != kVersion)
    throw Error(ErrorKind::Format, path.string() + ": unsupported version");
  const auto count = get<std::uint64_t>(in, path);
  if (count != stack.size()) throw Error(ErrorKind::Format, path.string() + ": tensor count mismatch");
  for (std::size_t l = 0; l < stack.size(); ++l) {
    const auto len = get<std::uint64_t>(in, path);
    if (len > 256) throw Error(ErrorKind::Format, path.string() + ": bad tensor name");
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    const auto n = get<std::uint64_t>(in, path);
    auto p = stack.layer(l).params();
    if (n != p.size()) throw Error(ErrorKind::Format, path.string() + ": size mismatch for tensor " + name);
    if (!in.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(n * sizeof(double))))
      throw Error(ErrorKind::Format, path.string() + ": truncated parameter file");
  }
}

NeuralRegressor::NeuralRegressor(NetworkKind kind, nlohmann::json hyperparams)
    : kind_(kind), hyperparams_(std::move(hyperparams)) {
  if (hyperparams_.is_null()) hyperparams_ = nlohmann::json::object();
  config_ = TrainConfig::from_json(hyperparams_);
  config_.validate();
  lookback_ = hyperparams_.value("lookback", std::size_t{1});
  if (lookback_ == 0) throw Error(ErrorKind::InvalidArgument, "lookback must be >= 1");
}

std::string NeuralRegressor::model_type() const { return std::string(to_string(kind_)); }

LayerStack NeuralRegressor::build(std::size_t d_in) const {
  const auto& h = hyperparams_;
  switch (kind_) {
    case NetworkKind::Mlp:
      return build_mlp(d_in, h.value("hidden_layers", std::size_t{13}), h.value("width", std::size_t{32}),
                       parse_activation(h.value("activation", std::string("relu"))));
    case NetworkKind::Cnn1d:
      return build_cnn1d(d_in, h.value("filters", std::size_t{64}), h.value("kernel_size", std::size_t{2}),
                         h.value("pool", std::size_t{2}), h.value("dense_width", std::size_t{50}));
    case NetworkKind::Lstm:
      if (d_in % lookback_ != 0) {
        throw Error(ErrorKind::ShapeMismatch,
                    "lstm input width " + std::to_string(d_in) + " is not a multiple of lookback " +
                        std::to_string(lookback_));
      }
      return build_lstm(lookback_, d_in / lookback_, h.value("units", std::size_t{50}));
  }
  throw Error(ErrorKind::InvalidArgument, "unknown network kind");
}

void NeuralRegressor::fit(const Matrix& X, const Vector& y) {
  require_fit_inputs(X, y);
  stack_ = build(static_cast<std::size_t>(X.cols()));
  const Init init =
      parse_init(hyperparams_.value("init", std::string(kind_ == NetworkKind::Lstm ? "normal" : "he")));
  Rng init_rng(mix_seed(config_.seed ^ 0x696e6974ULL));
  stack_.initialize(init, init_rng);

  y_mean_ = y.mean();
  const double var = (y.array() - y_mean_).square().mean();
  y_scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
  Matrix Y = ((y.array() - y_mean_) / y_scale_).matrix();

  TrainConfig cfg = config_;
  cfg.target_scale = y_scale_;
  trace_ = train(stack_, X, Y, cfg);
  fitted_ = true;
}

Vector NeuralRegressor::predict(const Matrix& X) const {
  if (!fitted_) throw Error(ErrorKind::NotFitted, model_type() + " has not been fitted");
  if (static_cast<std::size_t>(X.cols()) != stack_.in_size())
    throw Error(ErrorKind::ShapeMismatch, "expected " + std::to_string(stack_.in_size()) + " input columns");
  Vector out(X.rows());
  constexpr Eigen::Index kChunk = 1024;
  for (Eigen::Index start = 0; start < X.rows(); start += kChunk) {
    const Eigen::Index m = std::min(kChunk, X.rows() - start);
    const Matrix yhat = stack_.forward(X.middleRows(start, m).transpose());
    out.segment(start, m) = (yhat.row(0).transpose().array() * y_scale_ + y_mean_).matrix();
  }
  return out;
}

nlohmann::json NeuralRegressor::to_json() const {
  nlohmann::json j = {{"model_type", model_type()},
                      {"hyperparams", hyperparams_},
                      {"train_config", config_.to_json()},
                      {"lookback", lookback_},
                      {"fitted", fitted_}};
  if (fitted_) {
    j["architecture"] = stack_.architecture();
    j["parameter_count"] = stack_.parameter_count();
    j["target_mean"] = y_mean_;
    j["target_scale"] = y_scale_;
    j["epochs_run"] = trace_.size();
    if (!trace_.loss.empty()) j["final_loss"] = trace_.loss.back();
  }
  return j;
}

void NeuralRegressor::save(const std::filesystem::path& stem) const {
  if (!fitted_) throw Error(ErrorKind::NotFitted, model_type() + " has not been fitted");
  auto manifest = to_json();
  const std::string base = stem.filename().string();
  manifest["parameters_file"] = base + ".params.bin";
  manifest["trace_file"] = base + ".trace.csv";
  const auto dir = stem.parent_path();
  {
    std::ofstream out(dir / (base + ".json"));
    if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / (base + ".json")).string());
    out << manifest.dump(2) << "\n";
  }
  write_parameters(dir / (base + ".params.bin"), stack_);
  trace_.write_csv(dir / (base + ".trace.csv"));
}

std::unique_ptr<NeuralRegressor> NeuralRegressor::load(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, manifest_path.string() + ": " + e.what());
  }
  auto m = std::make_unique<NeuralRegressor>(parse_network_kind(j.at("model_type").get<std::string>()),
                                             j.at("hyperparams"));
  if (!j.value("fitted", false)) return m;
  const auto dir = manifest_path.parent_path();
  m->stack_ = LayerStack::from_architecture(j.at("architecture"));
  read_parameters(dir / j.at("parameters_file").get<std::string>(), m->stack_);
  m->trace_ = EpochTrace::read_csv(dir / j.at("trace_file").get<std::string>());
  m->y_mean_ = j.at("target_mean").get<double>();
  m->y_scale_ = j.at("target_scale").get<double>();
  m->fitted_ = true;
  return m;
}

}  // namespace windbench::nn
