#include "windbench/nn_train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "windbench/data.hpp"

namespace windbench::nn {

std::string_view to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(std::string_view s) {
  if (s == "adam") return Optimizer::Adam;
  if (s == "sgd") return Optimizer::Sgd;
  throw Error(ErrorKind::InvalidArgument, "unknown optimizer '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"optimizer", to_string(optimizer)},
          {"learning_rate", learning_rate},
          {"beta1", beta1},
          {"beta2", beta2},
          {"epsilon", epsilon},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.seed = j.value("seed", c.seed);
  return c;
}

void EpochTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "epoch,loss,mse\n";
  char buf[96];
  for (std::size_t e = 0; e < loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e + 1, loss[e], mse[e]);
    out << buf;
  }
}

EpochTrace EpochTrace::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  const auto records = data::read_csv_records(in);
  EpochTrace t;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != 3) throw Error(ErrorKind::Format, path.string() + ": expected 3 columns");
    t.loss.push_back(std::stod(records[r][1]));
    t.mse.push_back(std::stod(records[r][2]));
  }
  return t;
}

namespace {

struct AdamState {
  std::vector<std::vector<double>> m, v;
  long step = 0;
};

}  // namespace

EpochTrace train(LayerStack& stack, const Matrix& X, const Matrix& Y, const TrainConfig& config) {
  config.validate();
  if (X.rows() == 0) throw Error(ErrorKind::Empty, "no training samples");
  if (X.rows() != Y.rows()) throw Error(ErrorKind::ShapeMismatch, "X and Y sample counts differ");
  if (static_cast<std::size_t>(X.cols()) != stack.in_size() ||
      static_cast<std::size_t>(Y.cols()) != stack.out_size()) {
    throw Error(ErrorKind::ShapeMismatch, "training data does not match the network shape");
  }

  const std::size_t n = static_cast<std::size_t>(X.rows());
  const Matrix Xt = X.transpose();
  const Matrix Yt = Y.transpose();
  const double scale2 = config.target_scale * config.target_scale;

  Rng rng(mix_seed(config.seed));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  AdamState adam;
  adam.m = stack.zero_grads();
  adam.v = stack.zero_grads();

  EpochTrace trace;
  LayerStack::Tape tape;
  Matrix xb, yb;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng.index(i + 1)]);
    double sum_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t B = std::min(config.batch_size, n - start);
      xb.resize(Xt.rows(), static_cast<Eigen::Index>(B));
      yb.resize(Yt.rows(), static_cast<Eigen::Index>(B));
      for (std::size_t k = 0; k < B; ++k) {
        const auto src = static_cast<Eigen::Index>(order[start + k]);
        xb.col(static_cast<Eigen::Index>(k)) = Xt.col(src);
        yb.col(static_cast<Eigen::Index>(k)) = Yt.col(src);
      }
      const Matrix out = stack.forward(xb, tape);
      const Matrix diff = out - yb;
      const double batch_loss = diff.squaredNorm() / static_cast<double>(B * Yt.rows());
      if (!std::isfinite(batch_loss)) {
        throw DivergedLoss("loss became non-finite in epoch " + std::to_string(epoch + 1), trace);
      }
      sum_loss += batch_loss * static_cast<double>(B);

      auto grads = stack.zero_grads();
      stack.backward(diff * (2.0 / static_cast<double>(B * Yt.rows())), tape, grads);

      if (config.optimizer == Optimizer::Sgd) {
        for (std::size_t l = 0; l < stack.size(); ++l) {
          auto p = stack.layer(l).params();
          for (std::size_t k = 0; k < p.size(); ++k) p[k] -= config.learning_rate * grads[l][k];
        }
      } else {
        ++adam.step;
        const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam.step));
        const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam.step));
        for (std::size_t l = 0; l < stack.size(); ++l) {
          auto p = stack.layer(l).params();
          auto& m = adam.m[l];
          auto& v = adam.v[l];
          const auto& g = grads[l];
          for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
            v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p[k] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
          }
        }
      }
    }
    const double loss = sum_loss / static_cast<double>(n);
    trace.loss.push_back(loss);
    trace.mse.push_back(loss * scale2);
  }
  return trace;
}

double grad_rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double check_loss(const LayerStack& stack, const Matrix& x, const Matrix& target, LayerStack::Tape& tape,
                  std::vector<std::int64_t>* state) {
  const Matrix out = stack.forward(x, tape);
  if (state) *state = stack.switching_state(tape);
  return (out - target).squaredNorm() / static_cast<double>(x.cols());
}

}  // namespace

GradCheckReport gradient_check(LayerStack& stack, const Matrix& x, const Matrix& target, double step,
                               bool include_inputs) {
  if (target.rows() != static_cast<Eigen::Index>(stack.out_size()) || target.cols() != x.cols())
    throw Error(ErrorKind::ShapeMismatch, "gradient_check target shape does not match the network output");

  LayerStack::Tape tape;
  std::vector<std::int64_t> base_state;
  const Matrix out = stack.forward(x, tape);
  base_state = stack.switching_state(tape);
  auto grads = stack.zero_grads();
  const Matrix gx = stack.backward((out - target) * (2.0 / static_cast<double>(x.cols())), tape, grads);

  GradCheckReport report;
  std::vector<std::int64_t> sp, sm;
  Matrix xp = x;
  auto probe = [&](double& slot, double analytic, const std::string& where) {
    const double saved = slot;
    slot = saved + step;
    const double lp = check_loss(stack, xp, target, tape, &sp);
    slot = saved - step;
    const double lm = check_loss(stack, xp, target, tape, &sm);
    slot = saved;
    if (sp != base_state || sm != base_state) {
      report.excluded.push_back(where);
      return;
    }
    const double numeric = (lp - lm) / (2.0 * step);
    const double rel = grad_rel_error(analytic, numeric);
    if (report.checked++ == 0 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = {where, analytic, numeric, rel};
    }
  };

  for (std::size_t l = 0; l < stack.size(); ++l) {
    auto p = stack.layer(l).params();
    for (std::size_t k = 0; k < p.size(); ++k)
      probe(p[k], grads[l][k], "layer " + std::to_string(l) + " param " + std::to_string(k));
  }
  if (include_inputs) {
    for (Eigen::Index c = 0; c < xp.cols(); ++c)
      for (Eigen::Index r = 0; r < xp.rows(); ++r)
        probe(xp(r, c), gx(r, c), "input " + std::to_string(r) + "," + std::to_string(c));
  }
  return report;
}

}  // namespace windbench::nn
