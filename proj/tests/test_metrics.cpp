#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "windbench/diagnostics.hpp"
#include "windbench/linear.hpp"
#include "windbench/metrics.hpp"
#include "windbench/plot.hpp"

using namespace windbench;
using namespace windbench::metrics;
using namespace windbench::diagnostics;

namespace {

using V = std::vector<double>;

double rel(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace

TEST_CASE("metric hand values") {
  CHECK(mae(V{0, 0}, V{1, -1}) == 1.0);
  CHECK(mse(V{0, 0}, V{1, -1}) == 1.0);
  CHECK(medae(V{3}, V{5}) == 2.0);
  CHECK(medae(V{0, 0, 0}, V{1, 2, 100}) == 2.0);
  CHECK(medae(V{0, 0, 0, 0}, V{1, 2, 4, 100}) == 3.0);
  const V y{1, 2, 3, 4};
  CHECK(mae(y, y) == 0.0);
  CHECK(r2(y, y) == 1.0);
  CHECK(r2(y, V{2.5, 2.5, 2.5, 2.5}) == 0.0);
}

TEST_CASE("metric errors") {
  auto kind = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Usage;
  };
  CHECK(kind([] { (void)mae(V{1, 2}, V{1}); }) == ErrorKind::LengthMismatch);
  CHECK(kind([] { (void)mse(V{}, V{}); }) == ErrorKind::Empty);
  CHECK(kind([] { (void)r2(V{2, 2, 2}, V{1, 2, 3}); }) == ErrorKind::ZeroVariance);
  CHECK(kind([] { (void)r2(V{2}, V{1}); }) == ErrorKind::ZeroVariance);
  const auto rep = evaluate(V{2, 2}, V{1, 3}, "Model-1", "x");
  CHECK_FALSE(rep.r2_defined);
  CHECK(rep.to_json()["r2"].is_null());
}

TEST_CASE("metrics match the direct oracle on random inputs") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(1000);
    V y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = 8 + 3 * rng.normal();
      p[i] = y[i] + rng.normal();
    }
    const auto o = oracle::metrics(y, p);
    CHECK(rel(mae(y, p), o.mae) <= 1e-12);
    CHECK(rel(mse(y, p), o.mse) <= 1e-12);
    CHECK(rel(medae(y, p), o.medae) <= 1e-12);
    const auto rep = evaluate(y, p);
    REQUIRE(rep.r2_defined == o.r2.has_value());
    if (o.r2) CHECK(rel(rep.r2, *o.r2) <= 1e-12);
  }
}

TEST_CASE("metric properties") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.index(200);
    V y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.normal();
      p[i] = rng.normal() * 2;
    }
    CHECK(mae(y, p) * mae(y, p) <= mse(y, p) * (1 + 1e-12));
    CHECK(r2(y, p) <= 1.0);
    CHECK(mae(y, p) == doctest::Approx(mae(p, y)).epsilon(1e-15));
  }
}

TEST_CASE("residual and prediction Q-Q series") {
  const V y{1, 2, 3, 4};
  const V yhat{1.5, 1.5, 3.5, 4.5};
  const auto res = residual_series(y, yhat);
  REQUIRE(res.points.size() == 4);
  CHECK(res.points[0].first == 1.5);
  CHECK(res.points[0].second == -0.5);
  CHECK(res.reference.slope == 0.0);
  const auto perfect = residual_series(y, y);
  for (const auto& [x, r] : perfect.points) CHECK(r == 0.0);

  const auto qq = pred_qq_series(y, y);
  for (const auto& [a, b] : qq.points) CHECK(a == b);
  CHECK(qq.reference.slope == 1.0);
  const auto flat = pred_qq_series(y, V{2, 2, 2, 2});
  for (const auto& [a, b] : flat.points) CHECK(b == 2.0);

  Rng rng(3);
  Matrix X(60, 2);
  for (auto& v : X.reshaped()) v = rng.normal();
  const Vector t = X.col(0) * 1.5 + Vector::Constant(60, 2.0) + 0.3 * Vector::NullaryExpr(60, [&] {
    return rng.normal();
  });
  const auto m = linear::fit_ols(X, t);
  const auto r = residual_series(span_of(t), span_of(Vector(m.predict(X))));
  double mean = 0;
  for (const auto& pt : r.points) mean += pt.second / 60.0;
  CHECK(std::abs(mean) < 1e-10);
}

TEST_CASE("chi-square quantiles agree with boost") {
  for (double dof : {1.0, 2.0, 3.0, 17.0}) {
    boost::math::chi_squared_distribution<double> dist(dof);
    for (double p : {1e-4, 0.01, 0.2, 0.5, 0.77, 0.99, 0.9999}) {
      CHECK(std::abs(chi2_quantile(p, dof) - boost::math::quantile(dist, p)) < 1e-8);
      CHECK(std::abs(chi2_cdf(boost::math::quantile(dist, p), dof) - p) < 1e-12);
    }
  }
  for (double a : {0.5, 1.5, 8.5}) {
    for (double x : {0.1, 1.0, 5.0, 30.0}) {
      CHECK(std::abs(regularized_gamma_p(a, x) - boost::math::gamma_p(a, x)) < 1e-13);
    }
  }
  boost::math::normal_distribution<double> z;
  for (double p : {1e-6, 0.02, 0.5, 0.97}) {
    CHECK(std::abs(normal_quantile(p) - boost::math::quantile(z, p)) < 1e-8);
  }
}

TEST_CASE("mahalanobis trace identity on a 3x2 instance") {
  // x = (0,0), (1,0), (0,2): mean (1/3, 2/3); S (n-1) = [[1/3, -1/3], [-1/3, 4/3]]
  Matrix X(3, 2);
  X << 0, 0, 1, 0, 0, 2;
  const auto d2 = mahalanobis_squared(X);
  double sum = 0;
  for (double v : d2) sum += v;
  CHECK(sum == doctest::Approx(2.0 * 2).epsilon(1e-12));  // d (n - 1)
  // S^-1 = [[4, 1], [1, 1]]; first point offset (-1/3, -2/3) -> 4/9 + 4/9 + 4/9
  CHECK(d2[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));

  Rng rng(4);
  Matrix Y(200, 4);
  for (auto& v : Y.reshaped()) v = rng.normal();
  double total = 0;
  for (double v : mahalanobis_squared(Y)) total += v;
  CHECK(total / 200 == doctest::Approx(4.0 * 199 / 200).epsilon(1e-10));
}

TEST_CASE("chi-square Q-Q series") {
  Rng rng(5);
  Matrix X(10000, 1);
  for (auto& v : X.reshaped()) v = rng.normal();
  const auto s = chi2_qq_series(X);
  CHECK(pearson(s) > 0.99);
  CHECK(s.reference.slope == 1.0);
  for (std::size_t i = 1; i < s.points.size(); ++i) {
    CHECK(s.points[i].first >= s.points[i - 1].first);
    CHECK(s.points[i].second >= s.points[i - 1].second);
  }

  Matrix edge(4, 3);
  for (auto& v : edge.reshaped()) v = rng.normal();
  const auto degenerate = chi2_qq_series(edge);
  CHECK_FALSE(degenerate.warnings.empty());
  CHECK_THROWS_AS(chi2_qq_series(Matrix(3, 3).setRandom()), Error);

  Matrix collinear(50, 2);
  for (int i = 0; i < 50; ++i) {
    collinear(i, 0) = rng.normal();
    collinear(i, 1) = 2 * collinear(i, 0);
  }
  const auto ridge = chi2_qq_series(collinear);
  CHECK_FALSE(ridge.warnings.empty());
}

TEST_CASE("svg output is deterministic and well formed") {
  const auto s = pred_qq_series(V{1, 2, 3}, V{1.1, 1.9, 3.2});
  const auto a = plot::render_svg(s);
  CHECK(a == plot::render_svg(s));
  CHECK(a.rfind("<?xml", 0) == 0);
  CHECK(a.find("</svg>") != std::string::npos);
  CHECK(a.find("stroke-dasharray") != std::string::npos);
  std::size_t circles = 0;
  for (auto pos = a.find("<circle"); pos != std::string::npos; pos = a.find("<circle", pos + 1)) ++circles;
  CHECK(circles == 3);

  const auto loss = epoch_series(V{3, 2, 1.5}, "loss", "mse");
  CHECK(plot::render_svg(loss).find("<polyline") != std::string::npos);
}
