#pragma once

// Epsilon-insensitive support vector regression trained by SMO.

#include <memory>
#include <string>

#include "windbench/regressor.hpp"

namespace windbench::svr {

enum class KernelType { Rbf, Linear, Poly };

struct Kernel {
  KernelType type = KernelType::Rbf;
  double gamma = 1.0;
  int degree = 3;
  double coef0 = 0.0;

  [[nodiscard]] double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                                  const Eigen::Ref<const Eigen::RowVectorXd>& b) const;
  [[nodiscard]] nlohmann::json to_json() const;
  static Kernel from_json(const nlohmann::json& j);
};

/// 1 / (d * Var(X)) with the variance pooled over every entry of X.
double scale_gamma(const Matrix& X);

/// Gram matrix K(X_i, X_j).
Matrix gram_matrix(const Kernel& k, const Matrix& X);

struct SvrOptions {
  double C = 1.0;
  double epsilon = 0.1;
  Kernel kernel;
  bool gamma_scale = true;  // replace kernel.gamma with scale_gamma(X) at fit time
  double tol = 1e-3;
  long max_iter = 100000;
};

struct SvrModel {
  Matrix support_vectors;  // rows
  Vector dual_coef;        // alpha_i - alpha_i^*, one per support vector
  double bias = 0.0;
  Kernel kernel;
  double C = 1.0;
  double epsilon = 0.1;
  double objective = 0.0;  // dual objective at the returned iterate
  Convergence convergence;

  [[nodiscard]] Vector predict(const Matrix& X) const;
  [[nodiscard]] nlohmann::json to_json() const;
  static SvrModel from_json(const nlohmann::json& j);
};

/// Dual objective 0.5 b'Kb + eps*||b||_1 - y'b for dual coefficients b.
double dual_objective(const Matrix& K, const Vector& y, double epsilon, const Vector& beta);

struct SvrFit {
  SvrModel model;
  Vector beta;  // full-length dual coefficient vector (zeros included)
};

SvrFit fit_svr_full(const Matrix& X, const Vector& y, const SvrOptions& opts);
SvrModel fit_svr(const Matrix& X, const Vector& y, const SvrOptions& opts);
Vector predict_svr(const SvrModel& model, const Matrix& X);

class SvrRegressor final : public Regressor {
 public:
  explicit SvrRegressor(nlohmann::json hyperparams);

  [[nodiscard]] std::string model_type() const override { return "svr"; }
  void fit(const Matrix& X, const Vector& y) override;
  [[nodiscard]] Vector predict(const Matrix& X) const override;
  [[nodiscard]] bool fitted() const override { return fitted_; }
  [[nodiscard]] nlohmann::json to_json() const override;

  static std::unique_ptr<SvrRegressor> from_json(const nlohmann::json& j);
  [[nodiscard]] const SvrModel& model() const { return model_; }

 private:
  nlohmann::json hyperparams_;
  SvrModel model_;
  bool fitted_ = false;
};

}  // namespace windbench::svr
