#pragma once

// Regression error metrics.

#include <span>
#include <string>

#include "json.hpp"
#include "windbench/common.hpp"

namespace windbench::metrics {

/// Mean absolute error. Throws LengthMismatch or Empty.
double mae(std::span<const double> y, std::span<const double> yhat);
/// Mean squared error.
double mse(std::span<const double> y, std::span<const double> yhat);
/// Median absolute error; even n takes the midpoint of the two middle values.
double medae(std::span<const double> y, std::span<const double> yhat);
/// Coefficient of determination against the mean of the actual values.
/// Throws ZeroVariance when n < 2 or every actual value is equal.
double r2(std::span<const double> y, std::span<const double> yhat);

struct MetricsReport {
  std::string model_id;
  std::string algorithm;
  std::string split_id = "test";
  std::size_t n = 0;
  double mae = 0.0;
  double mse = 0.0;
  double medae = 0.0;
  double r2 = 0.0;
  bool r2_defined = true;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// All four metrics at once. An undefined R^2 is recorded as r2_defined = false
/// rather than thrown.
MetricsReport evaluate(std::span<const double> y, std::span<const double> yhat, std::string model_id = {},
                       std::string algorithm = {});

inline std::span<const double> span_of(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace windbench::metrics
