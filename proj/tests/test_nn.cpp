#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "doctest.h"
#include "oracles.hpp"
#include "windbench/deep_models.hpp"

using namespace windbench;
using namespace windbench::nn;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0) {
  Matrix m(r, c);
  for (auto& v : m.reshaped()) v = sd * rng.normal();
  return m;
}

void randomize(LayerStack& s, Rng& rng, double sd) {
  for (std::size_t k = 0; k < s.size(); ++k)
    for (auto& p : s.layer(k).params()) p = sd * rng.normal();
}

// Fourth-order Richardson extrapolation of central differences at steps h and
// h/2: truncation O(h^4) and roundoff near eps/h, both far below 1e-9 at h = 1e-3.
double richardson(const std::function<double(double)>& loss_at_offset, double h) {
  auto central = [&](double s) { return (loss_at_offset(s) - loss_at_offset(-s)) / (2 * s); };
  return (4 * central(h / 2) - central(h)) / 3;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("windbench_test_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("dense: zero map and identity") {
  DenseLayer relu(3, 3, Activation::Relu);
  Rng rng(1);
  const Matrix x = random_matrix(rng, 3, 4);
  CHECK(relu.forward(x, nullptr).isZero(0.0));

  DenseLayer lin(3, 3, Activation::Linear);
  lin.weights() = Matrix::Identity(3, 3);
  CHECK(lin.forward(x, nullptr) == x);
}

TEST_CASE("gradient check: linear dense layer is exact") {
  LayerStack s;
  s.emplace<DenseLayer>(4, 2, Activation::Linear);
  Rng rng(2);
  randomize(s, rng, 0.5);
  const auto r = gradient_check(s, random_matrix(rng, 4, 3), random_matrix(rng, 2, 3));
  CHECK(r.max_rel_error < 1e-8);
  CHECK(r.excluded.empty());
}

TEST_CASE("gradient relative error floors tiny magnitudes") {
  CHECK(grad_rel_error(2.0, 1.0) == 0.5);
  CHECK(grad_rel_error(-1e-3, -1e-3) == 0.0);
  CHECK(grad_rel_error(1e-12, 0.0) == doctest::Approx(1e-4));
}

TEST_CASE("gradient check: dense relu, conv1d, max-pool, lstm") {
  Rng rng(3);
  SUBCASE("dense 4 -> 3 relu") {
    LayerStack s;
    s.emplace<DenseLayer>(4, 3, Activation::Relu);
    s.emplace<DenseLayer>(3, 1, Activation::Linear);
    randomize(s, rng, 0.7);
    const auto r = gradient_check(s, random_matrix(rng, 4, 5), random_matrix(rng, 1, 5));
    CHECK(r.max_rel_error < 1e-5);
    CHECK(r.checked > 0);
  }
  SUBCASE("conv1d") {
    LayerStack s;
    s.emplace<Conv1dLayer>(6, 2, 3, 2, Activation::Relu);
    s.emplace<DenseLayer>(15, 1, Activation::Linear);
    randomize(s, rng, 0.5);
    const auto r = gradient_check(s, random_matrix(rng, 12, 4), random_matrix(rng, 1, 4));
    CHECK(r.max_rel_error < 1e-5);
  }
  SUBCASE("max-pool") {
    LayerStack s;
    s.emplace<Conv1dLayer>(9, 1, 4, 2, Activation::Linear);
    s.emplace<MaxPool1dLayer>(8, 4, 2);
    s.emplace<FlattenLayer>(16);
    s.emplace<DenseLayer>(16, 2, Activation::Linear);
    randomize(s, rng, 0.5);
    const auto r = gradient_check(s, random_matrix(rng, 9, 3), random_matrix(rng, 2, 3));
    CHECK(r.max_rel_error < 1e-5);
  }
  SUBCASE("lstm T=3 h=4 d=2") {
    LayerStack s;
    s.emplace<LstmLayer>(3, 2, 4);
    s.emplace<DenseLayer>(4, 1, Activation::Linear);
    randomize(s, rng, 0.5);
    const Matrix x = random_matrix(rng, 6, 3);
    const Matrix t = random_matrix(rng, 1, 3);
    const auto r = gradient_check(s, x, t);
    CHECK(r.excluded.empty());
    CHECK(r.checked == s.parameter_count() + 6 * 3);

    LayerStack::Tape tape;
    const Matrix out = s.forward(x, tape);
    auto grads = s.zero_grads();
    (void)s.backward((out - t) * (2.0 / 3.0), tape, grads);
    double worst = 0;
    for (std::size_t l = 0; l < s.size(); ++l) {
      auto p = s.layer(l).params();
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double saved = p[k];
        const double ref = richardson(
            [&](double off) {
              p[k] = saved + off;
              const double v = (s.forward(x) - t).squaredNorm() / 3.0;
              p[k] = saved;
              return v;
            },
            1e-3);
        worst = std::max(worst, std::abs(grads[l][k] - ref) / std::max({std::abs(grads[l][k]), std::abs(ref), 1e-8}));
      }
    }
    CHECK(worst < 1e-7);
  }
}

TEST_CASE("gradient check reports relu kinks instead of failing") {
  LayerStack s;
  auto& d = s.emplace<DenseLayer>(2, 2, Activation::Relu);
  s.emplace<DenseLayer>(2, 1, Activation::Linear);
  Rng rng(4);
  randomize(s, rng, 1.0);
  d.weights() << 1.0, -1.0, 0.5, 0.25;
  d.bias().setZero();
  Matrix x(2, 1);
  x << 0.3, 0.3;  // first unit's pre-activation is exactly zero
  const auto r = gradient_check(s, x, Matrix::Constant(1, 1, 0.2));
  CHECK_FALSE(r.excluded.empty());
  CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("max-pool picks the window maximum") {
  MaxPool1dLayer pool(4, 1, 2);
  Matrix x(4, 1);
  x << 1, 3, 2, 2;
  CHECK(pool.forward(x, nullptr) == (Matrix(2, 1) << 3, 2).finished());
  CHECK_THROWS_AS(MaxPool1dLayer(1, 1, 2), Error);
}

TEST_CASE("lstm: zero cell stays at zero") {
  LstmLayer cell(1, 3, 4);
  Rng rng(5);
  const Matrix x = random_matrix(rng, 3, 2);
  const auto r = lstm_step(cell, x, Matrix::Zero(4, 2), Matrix::Zero(4, 2));
  CHECK(r.h.isZero(0.0));
  CHECK(r.c.isZero(0.0));
  CHECK(r.cache.f.isConstant(0.5, 0.0));
  CHECK(r.cache.i.isConstant(0.5, 0.0));
  CHECK(r.cache.o.isConstant(0.5, 0.0));

  LayerStack s;
  s.emplace<LstmLayer>(3, 3, 4);
  auto& head = s.emplace<DenseLayer>(4, 1, Activation::Linear);
  head.weights().setConstant(0.7);
  head.bias()(0) = -1.25;
  CHECK(s.forward(random_matrix(rng, 9, 5)).isConstant(-1.25, 0.0));
}

TEST_CASE("lstm: saturated forget gate carries the cell state") {
  LstmLayer cell(1, 2, 3);
  Rng rng(6);
  for (auto& p : cell.params()) p = 0.4 * rng.normal();
  cell.set_hooks({1.0, 0.0});
  Matrix h = random_matrix(rng, 3, 2, 0.5);
  Matrix c = random_matrix(rng, 3, 2);
  const Matrix c0 = c;
  for (int t = 0; t < 10; ++t) {
    const auto r = lstm_step(cell, random_matrix(rng, 2, 2), h, c);
    CHECK(r.c == c);
    h = r.h;
    c = r.c;
  }
  CHECK(c == c0);

  LstmLayer open(1, 2, 3);
  open.b().segment(0, 3).setConstant(50.0);
  const Matrix c_prev = random_matrix(rng, 3, 1);
  const auto r = lstm_step(open, random_matrix(rng, 2, 1), Matrix::Zero(3, 1), c_prev);
  CHECK((r.c - c_prev).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("lstm step matches the scalar cell equations") {
  const int h = 3, d = 2;
  LstmLayer cell(1, d, h);
  Rng rng(7);
  for (auto& p : cell.params()) p = 0.8 * rng.normal();
  const Matrix x = random_matrix(rng, d, 1);
  const Matrix hp = random_matrix(rng, h, 1, 0.5);
  const Matrix cp = random_matrix(rng, h, 1);
  const auto r = lstm_step(cell, x, hp, cp);
  const auto W = cell.W();
  const auto U = cell.U();
  const auto b = cell.b();
  for (int u = 0; u < h; ++u) {
    double pre[4];
    for (int g = 0; g < 4; ++g) {
      const int row = g * h + u;
      pre[g] = b(row);
      for (int j = 0; j < d; ++j) pre[g] += W(row, j) * x(j, 0);
      for (int j = 0; j < h; ++j) pre[g] += U(row, j) * hp(j, 0);
    }
    const double f = oracle::sigmoid(pre[0]);
    const double i = oracle::sigmoid(pre[1]);
    const double o = oracle::sigmoid(pre[2]);
    const double g = std::tanh(pre[3]);
    const double c = f * cp(u, 0) + i * g;
    CHECK(r.c(u, 0) == doctest::Approx(c).epsilon(1e-14));
    CHECK(r.h(u, 0) == doctest::Approx(o * std::tanh(c)).epsilon(1e-14));
  }
}

TEST_CASE("lstm gate ranges and bounded hidden state") {
  LstmLayer cell(1, 4, 5);
  Rng rng(8);
  for (auto& p : cell.params()) p = 2.0 * rng.normal();
  Matrix hs = Matrix::Zero(5, 16), cs = Matrix::Zero(5, 16);
  for (int t = 0; t < 20; ++t) {
    const auto r = lstm_step(cell, random_matrix(rng, 4, 16, 3.0), hs, cs);
    for (const Matrix* gate : {&r.cache.f, &r.cache.i, &r.cache.o}) {
      CHECK(gate->minCoeff() >= 0.0);
      CHECK(gate->maxCoeff() <= 1.0);
    }
    CHECK(r.h.cwiseAbs().maxCoeff() < 1.0);
    hs = r.h;
    cs = r.c;
  }
}

TEST_CASE("mlp shape and parameter count") {
  const auto s = build_mlp(17, 13, 32);
  CHECK(s.size() == 14);
  CHECK(s.parameter_count() == 17 * 32 + 32 + 12 * (32 * 32 + 32) + 32 + 1);
  CHECK(dynamic_cast<const DenseLayer&>(s.layer(0)).weights().rows() == 32);
  CHECK(dynamic_cast<const DenseLayer&>(s.layer(0)).weights().cols() == 17);

  auto linear = build_mlp(5, 0, 32);
  REQUIRE(linear.size() == 1);
  CHECK(dynamic_cast<const DenseLayer&>(linear.layer(0)).activation() == Activation::Linear);
}

TEST_CASE("cnn1d lengths and zero weights") {
  auto s = build_cnn1d(17);
  const auto& conv = dynamic_cast<const Conv1dLayer&>(s.layer(0));
  const auto& pool = dynamic_cast<const MaxPool1dLayer&>(s.layer(1));
  CHECK(conv.out_length() == 16);
  CHECK(pool.out_length() == 8);
  CHECK(s.layer(2).out_size() == 512);
  auto& last = dynamic_cast<DenseLayer&>(s.layer(s.size() - 1));
  last.bias()(0) = 0.375;
  Rng rng(9);
  CHECK(s.forward(random_matrix(rng, 17, 4)).isConstant(0.375, 0.0));
  CHECK_THROWS_AS(build_cnn1d(1), Error);
}

TEST_CASE("architecture round trip") {
  Rng rng(10);
  for (auto stack : {build_mlp(6, 2, 5), build_cnn1d(7, 4, 2, 2, 3), build_lstm(2, 3, 4)}) {
    stack.initialize(Init::He, rng);
    auto copy = LayerStack::from_architecture(stack.architecture());
    for (std::size_t k = 0; k < stack.size(); ++k) {
      auto src = stack.layer(k).params();
      std::copy(src.begin(), src.end(), copy.layer(k).params().begin());
    }
    const Matrix x = random_matrix(rng, static_cast<Eigen::Index>(stack.in_size()), 3);
    CHECK(copy.forward(x) == stack.forward(x));
  }
}

TEST_CASE("training: zero learning rate, realizable linear data, determinism") {
  Rng rng(11);
  const Matrix X = random_matrix(rng, 64, 3);
  const Matrix Y = X * (Vector(3) << 0.5, -1.0, 2.0).finished() + Matrix::Constant(64, 1, 0.3);

  LayerStack s;
  s.emplace<DenseLayer>(3, 1, Activation::Linear);
  s.initialize(Init::He, rng);
  const std::vector<double> before(s.layer(0).params().begin(), s.layer(0).params().end());
  TrainConfig frozen;
  frozen.epochs = 5;
  frozen.learning_rate = 0.0;
  frozen.optimizer = Optimizer::Sgd;
  const auto flat = train(s, X, Y, frozen);
  CHECK(std::equal(before.begin(), before.end(), s.layer(0).params().begin()));
  for (double v : flat.loss) CHECK(v == doctest::Approx(flat.loss[0]).epsilon(1e-12));

  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.learning_rate = 0.01;
  cfg.seed = 4;
  LayerStack a = s, b = s;
  const auto ta = train(a, X, Y, cfg);
  const auto tb = train(b, X, Y, cfg);
  CHECK(ta.loss == tb.loss);
  CHECK(ta.loss.back() < 1e-3);
  CHECK(ta.size() == 500);
}

TEST_CASE("training raises on a diverging loss") {
  Rng rng(12);
  const Matrix X = random_matrix(rng, 32, 2, 1e3);
  const Matrix Y = random_matrix(rng, 32, 1, 1e3);
  LayerStack s;
  s.emplace<DenseLayer>(2, 1, Activation::Linear);
  TrainConfig cfg;
  cfg.optimizer = Optimizer::Sgd;
  cfg.learning_rate = 10.0;
  cfg.epochs = 200;
  CHECK_THROWS_AS(train(s, X, Y, cfg), DivergedLoss);
}

TEST_CASE("neural regressor save and load") {
  Rng rng(13);
  const Matrix X = random_matrix(rng, 40, 4);
  const Vector y = X.col(0) * 2.0 + X.col(1).cwiseAbs() + Vector::Constant(40, 5.0);
  const auto dir = scratch_dir("neural");
  for (auto kind : {NetworkKind::Mlp, NetworkKind::Cnn1d, NetworkKind::Lstm}) {
    NeuralRegressor r(kind, {{"epochs", 3}, {"hidden_layers", 2}, {"width", 8}, {"units", 6}, {"seed", 1}});
    r.fit(X, y);
    const auto stem = dir / std::string(to_string(kind));
    r.save(stem);
    const auto back = NeuralRegressor::load(stem.string() + ".json");
    CHECK(back->predict(X) == r.predict(X));
    CHECK(back->trace().loss == r.trace().loss);
  }
  {
    std::ofstream bad(dir / "mlp.params.bin", std::ios::binary | std::ios::trunc);
    bad << "JUNK";
  }
  CHECK_THROWS_AS(NeuralRegressor::load(dir / "mlp.json"), Error);
  std::filesystem::remove_all(dir);
}
