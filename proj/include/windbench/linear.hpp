#pragma once

// Linear-family regressors: OLS, ridge, lasso, Bayesian ridge and Huber.
// All fit an unpenalized intercept by working on centered data.

#include <memory>
#include <string>

#include "windbench/regressor.hpp"

namespace windbench::linear {

struct LinearModel {
  std::string model_type;
  Vector coef;
  double intercept = 0.0;
  nlohmann::json hyperparams = nlohmann::json::object();
  Convergence convergence;

  [[nodiscard]] Vector predict(const Matrix& X) const;
  [[nodiscard]] nlohmann::json to_json() const;
  static LinearModel from_json(const nlohmann::json& j);
};

LinearModel fit_ols(const Matrix& X, const Vector& y);

/// Minimizes sum of squared residuals + alpha * ||w||^2.
LinearModel fit_ridge(const Matrix& X, const Vector& y, double alpha);

struct LassoOptions {
  double alpha = 0.01;
  double tol = 1e-6;
  int max_iter = 10000;
};

/// Cyclic coordinate descent on (1/2n) * RSS + alpha * ||w||_1.
LinearModel fit_lasso(const Matrix& X, const Vector& y, const LassoOptions& opts = {});

/// Smallest alpha for which every lasso coefficient is zero.
double lasso_alpha_max(const Matrix& X, const Vector& y);

struct BayesianRidgeOptions {
  int max_iter = 300;
  double tol = 1e-4;
  double alpha_1 = 1e-6;  // gamma hyper-prior on the noise precision
  double alpha_2 = 1e-6;
  double lambda_1 = 1e-6;  // gamma hyper-prior on the weight precision
  double lambda_2 = 1e-6;
};

/// Evidence maximization. The fitted noise and weight precisions are
/// stored in hyperparams as "alpha_noise" and "lambda_weights".
LinearModel fit_bayesian_ridge(const Matrix& X, const Vector& y, const BayesianRidgeOptions& opts = {});

struct HuberOptions {
  double delta = 1.35;   // threshold in units of the fitted scale
  double alpha = 1e-4;   // L2 penalty on coef
  double tol = 1e-6;
  int max_iter = 1000;
};

/// Huber regression with a jointly estimated scale, solved by alternating an
/// IRLS step on the coefficients with an exact 1-D scale update.
/// The fitted scale is stored in hyperparams as "scale".
LinearModel fit_huber(const Matrix& X, const Vector& y, const HuberOptions& opts = {});

/// Regressor adapter; `kind` is one of ols, ridge, lasso, bayesian_ridge, huber.
class LinearRegressor final : public Regressor {
 public:
  LinearRegressor(std::string kind, nlohmann::json hyperparams);

  [[nodiscard]] std::string model_type() const override { return kind_; }
  void fit(const Matrix& X, const Vector& y) override;
  [[nodiscard]] Vector predict(const Matrix& X) const override;
  [[nodiscard]] bool fitted() const override { return fitted_; }
  [[nodiscard]] nlohmann::json to_json() const override;

  static std::unique_ptr<LinearRegressor> from_json(const nlohmann::json& j);
  [[nodiscard]] const LinearModel& model() const { return model_; }

 private:
  std::string kind_;
  nlohmann::json hyperparams_;
  LinearModel model_;
  bool fitted_ = false;
};

}  // namespace windbench::linear
