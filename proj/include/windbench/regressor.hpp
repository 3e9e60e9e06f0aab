#pragma once

#include <string>

#include "json.hpp"
#include "windbench/common.hpp"

namespace windbench {

/// Outcome of an iterative solver. `flag` is one of "converged",
/// "not_converged", "rank_deficient", "all_rounds_rejected", or "closed_form".
struct Convergence {
  int iterations = 0;
  std::string flag = "converged";
  std::vector<std::string> warnings;

  [[nodiscard]] nlohmann::json to_json() const;
  static Convergence from_json(const nlohmann::json& j);
};

/// Shared fit/predict contract for every benchmarked model.
class Regressor {
 public:
  virtual ~Regressor() = default;

  [[nodiscard]] virtual std::string model_type() const = 0;
  virtual void fit(const Matrix& X, const Vector& y) = 0;
  /// Throws NotFitted before fit().
  [[nodiscard]] virtual Vector predict(const Matrix& X) const = 0;
  [[nodiscard]] virtual bool fitted() const = 0;
  [[nodiscard]] virtual nlohmann::json to_json() const = 0;
};

inline void require_fit_inputs(const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) {
    throw Error(ErrorKind::ShapeMismatch, "X has " + std::to_string(X.rows()) + " rows but y has " +
                                              std::to_string(y.size()));
  }
  if (X.rows() == 0) throw Error(ErrorKind::Empty, "no training rows");
}

inline std::vector<double> to_std_vector(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace windbench
