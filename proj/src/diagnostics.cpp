#include "windbench/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace windbench::diagnostics {

std::string_view to_string(PlotKind k) {
  switch (k) {
    case PlotKind::QqPred: return "qq_pred";
    case PlotKind::Residual: return "residual";
    case PlotKind::Chi2Qq: return "chi2_qq";
    case PlotKind::EpochLoss: return "epoch_loss";
  }
  return "?";
}

namespace {

void check_pairs(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) {
    throw Error(ErrorKind::LengthMismatch, "actual has " + std::to_string(y.size()) + " values, predicted has " +
                                               std::to_string(yhat.size()));
  }
}

}  // namespace

PlotSeries residual_series(std::span<const double> y, std::span<const double> yhat) {
  check_pairs(y, yhat);
  PlotSeries s;
  s.kind = PlotKind::Residual;
  s.title = "Residuals vs fitted";
  s.x_label = "predicted";
  s.y_label = "actual - predicted";
  s.points.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) s.points.emplace_back(yhat[i], y[i] - yhat[i]);
  s.reference = {0.0, 0.0};
  return s;
}

PlotSeries pred_qq_series(std::span<const double> y, std::span<const double> yhat) {
  check_pairs(y, yhat);
  PlotSeries s;
  s.kind = PlotKind::QqPred;
  s.title = "Actual vs predicted";
  s.x_label = "actual";
  s.y_label = "predicted";
  s.points.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) s.points.emplace_back(y[i], yhat[i]);
  std::stable_sort(s.points.begin(), s.points.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  s.reference = {1.0, 0.0};
  return s;
}

std::vector<double> mahalanobis_squared(const Matrix& X, std::vector<std::string>* warnings) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (d == 0) throw Error(ErrorKind::InvalidArgument, "feature matrix has no columns");
  if (n <= d) {
    throw Error(ErrorKind::SingularCovariance, "need more rows than columns (n=" + std::to_string(n) +
                                                   ", d=" + std::to_string(d) + ")");
  }
  if (n == d + 1 && warnings) warnings->push_back("degenerate: n = d + 1, all distances are equal");

  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Matrix Xc = X.rowwise() - mean;
  Matrix S = (Xc.transpose() * Xc) / static_cast<double>(n - 1);

  Eigen::LLT<Matrix> llt(S);
  auto well_conditioned = [&](const Eigen::LLT<Matrix>& f) {
    if (f.info() != Eigen::Success) return false;
    const Vector diag = f.matrixL().toDenseMatrix().diagonal();
    const double mx = diag.maxCoeff();
    const double mn = diag.minCoeff();
    return mn > 0.0 && mn / mx > 1e-10;
  };
  if (!well_conditioned(llt)) {
    const double ridge = 1e-8 * S.trace() / static_cast<double>(d);
    S.diagonal().array() += ridge;
    llt.compute(S);
    if (llt.info() != Eigen::Success || !(ridge > 0.0)) {
      throw Error(ErrorKind::SingularCovariance, "covariance is singular even after regularization");
    }
    if (warnings) warnings->push_back("covariance regularized by " + std::to_string(ridge) + " on the diagonal");
  }
  const Matrix Z = llt.matrixL().solve(Xc.transpose());
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = Z.col(i).squaredNorm();
  return out;
}

PlotSeries chi2_qq_series(const Matrix& X) {
  PlotSeries s;
  s.kind = PlotKind::Chi2Qq;
  s.title = "Chi-square Q-Q of squared Mahalanobis distance";
  s.x_label = "chi-square quantile (dof " + std::to_string(X.cols()) + ")";
  s.y_label = "squared Mahalanobis distance";
  auto d2 = mahalanobis_squared(X, &s.warnings);
  std::sort(d2.begin(), d2.end());
  const double n = static_cast<double>(d2.size());
  const double dof = static_cast<double>(X.cols());
  s.points.reserve(d2.size());
  for (std::size_t i = 0; i < d2.size(); ++i) {
    const double p = (static_cast<double>(i) + 0.5) / n;
    s.points.emplace_back(chi2_quantile(p, dof), d2[i]);
  }
  s.reference = {1.0, 0.0};
  return s;
}

PlotSeries epoch_series(std::span<const double> values, const std::string& title, const std::string& y_label) {
  PlotSeries s;
  s.kind = PlotKind::EpochLoss;
  s.title = title;
  s.x_label = "epoch";
  s.y_label = y_label;
  s.connect = true;
  s.points.reserve(values.size());
  for (std::size_t e = 0; e < values.size(); ++e) s.points.emplace_back(static_cast<double>(e + 1), values[e]);
  s.reference = {0.0, 0.0};
  return s;
}

// Numerical Recipes style evaluation: series below a + 1, Lentz continued
// fraction for the upper tail above it.
double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw Error(ErrorKind::InvalidArgument, "gamma shape must be positive");
  if (x <= 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int k = 0; k < 100000; ++k) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return std::min(1.0, sum * std::exp(log_prefix));
  }
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int k = 1; k < 100000; ++k) {
    const double an = -k * (k - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-17) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_prefix) * h);
}

double chi2_cdf(double x, double dof) { return regularized_gamma_p(0.5 * dof, 0.5 * x); }

// Acklam's rational approximation.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::InvalidArgument, "probability must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double chi2_quantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::InvalidArgument, "probability must lie in (0, 1)");
  if (!(dof > 0.0)) throw Error(ErrorKind::InvalidArgument, "degrees of freedom must be positive");
  const double z = normal_quantile(p);
  const double v = 2.0 / (9.0 * dof);
  const double guess = std::max(dof * std::pow(std::max(1.0 - v + z * std::sqrt(v), 0.0), 3), 1e-12);

  // Bracket around the guess, then bisect.
  double lo = guess, hi = guess;
  double step = std::max(0.1 * guess, 1e-3);
  while (lo > 0.0 && chi2_cdf(lo, dof) > p) {
    lo = std::max(0.0, lo - step);
    step *= 2.0;
  }
  step = std::max(0.1 * guess, 1e-3);
  while (chi2_cdf(hi, dof) < p) {
    hi += step;
    step *= 2.0;
  }
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (chi2_cdf(mid, dof) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double pearson(const PlotSeries& s) {
  const double n = static_cast<double>(s.points.size());
  if (s.points.size() < 2) throw Error(ErrorKind::Empty, "correlation needs at least two points");
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : s.points) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& [x, y] : s.points) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::ZeroVariance, "constant coordinate");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace windbench::diagnostics
