#include "windbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace windbench::metrics {

namespace {

void check(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) {
    throw Error(ErrorKind::LengthMismatch, "actual has " + std::to_string(y.size()) + " values, predicted has " +
                                               std::to_string(yhat.size()));
  }
  if (y.empty()) throw Error(ErrorKind::Empty, "metrics need at least one pair");
}

}  // namespace

double mae(std::span<const double> y, std::span<const double> yhat) {
  check(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

double mse(std::span<const double> y, std::span<const double> yhat) {
  check(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    s += e * e;
  }
  return s / static_cast<double>(y.size());
}

double medae(std::span<const double> y, std::span<const double> yhat) {
  check(y, yhat);
  std::vector<double> e(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) e[i] = std::abs(y[i] - yhat[i]);
  std::sort(e.begin(), e.end());
  const std::size_t n = e.size();
  if (n % 2 == 1) return e[n / 2];
  return 0.5 * (e[n / 2 - 1] + e[n / 2]);
}

double r2(std::span<const double> y, std::span<const double> yhat) {
  check(y, yhat);
  if (y.size() < 2) throw Error(ErrorKind::ZeroVariance, "R^2 needs at least two samples");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  }
  if (ss_tot == 0.0) throw Error(ErrorKind::ZeroVariance, "actual values have zero variance; R^2 is undefined");
  return 1.0 - ss_res / ss_tot;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j = {{"model", model_id}, {"algorithm", algorithm}, {"split", split_id}, {"n", n},
                      {"mae", mae},        {"mse", mse},             {"medae", medae}};
  if (r2_defined) j["r2"] = r2;
  else j["r2"] = nullptr;
  return j;
}

MetricsReport evaluate(std::span<const double> y, std::span<const double> yhat, std::string model_id,
                       std::string algorithm) {
  MetricsReport r;
  r.model_id = std::move(model_id);
  r.algorithm = std::move(algorithm);
  r.n = y.size();
  r.mae = mae(y, yhat);
  r.mse = mse(y, yhat);
  r.medae = medae(y, yhat);
  try {
    r.r2 = metrics::r2(y, yhat);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ZeroVariance) throw;
    r.r2_defined = false;
    r.r2 = std::nan("");
  }
  return r;
}

}  // namespace windbench::metrics
