#pragma once

// Plot-ready diagnostic series: residuals, actual-vs-predicted, chi-square Q-Q
// of Mahalanobis distances, and training curves.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "windbench/common.hpp"

namespace windbench::diagnostics {

enum class PlotKind { QqPred, Residual, Chi2Qq, EpochLoss };
std::string_view to_string(PlotKind k);

/// Reference line y = slope * x + intercept.
struct ReferenceLine {
  double slope = 0.0;
  double intercept = 0.0;
};

struct PlotSeries {
  PlotKind kind = PlotKind::Residual;
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::pair<double, double>> points;
  ReferenceLine reference;
  bool connect = false;  // draw as a polyline instead of markers
  std::vector<std::string> warnings;
};

/// Points (yhat_i, y_i - yhat_i) with the y = 0 reference.
PlotSeries residual_series(std::span<const double> y, std::span<const double> yhat);

/// Points (y_i, yhat_i) sorted by y (stable) with the 45-degree reference.
PlotSeries pred_qq_series(std::span<const double> y, std::span<const double> yhat);

/// Points (chi-square_d quantile at (i - 0.5) / n, i-th smallest squared
/// Mahalanobis distance) using the n - 1 sample covariance. A singular
/// covariance is ridge-regularized by 1e-8 * trace / d and flagged; if that
/// still fails, or n <= d, SingularCovariance is thrown. n = d + 1 is flagged
/// as degenerate (every distance is then equal).
PlotSeries chi2_qq_series(const Matrix& X);

/// Squared Mahalanobis distances in row order, with the same covariance handling.
std::vector<double> mahalanobis_squared(const Matrix& X, std::vector<std::string>* warnings = nullptr);

/// One series per curve, x = epoch (1-based).
PlotSeries epoch_series(std::span<const double> values, const std::string& title, const std::string& y_label);

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
double chi2_cdf(double x, double dof);
/// Standard normal quantile (rational approximation, |rel err| < 1.2e-9).
double normal_quantile(double p);
/// Wilson-Hilferty starting point refined by bisection on chi2_cdf to an
/// absolute tolerance of 1e-10 in x.
double chi2_quantile(double p, double dof);

/// Pearson correlation of the two coordinates.
double pearson(const PlotSeries& s);

}  // namespace windbench::diagnostics
