#include "windbench/linear.hpp"

#include <algorithm>
#include <cmath>

namespace windbench {

nlohmann::json Convergence::to_json() const {
  nlohmann::json j{{"iters", iterations}, {"flag", flag}};
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

Convergence Convergence::from_json(const nlohmann::json& j) {
  Convergence c;
  c.iterations = j.value("iters", 0);
  c.flag = j.value("flag", std::string("converged"));
  c.warnings = j.value("warnings", std::vector<std::string>{});
  return c;
}

}  // namespace windbench

namespace windbench::linear {

namespace {

struct Centered {
  Matrix X;
  Vector y;
  Vector x_mean;
  double y_mean = 0.0;
};

Centered center(const Matrix& X, const Vector& y) {
  Centered c;
  c.x_mean = X.colwise().mean().transpose();
  c.y_mean = y.mean();
  c.X = X.rowwise() - c.x_mean.transpose();
  c.y = y.array() - c.y_mean;
  return c;
}

LinearModel finish(std::string type, const Centered& c, Vector coef) {
  LinearModel m;
  m.model_type = std::move(type);
  m.intercept = c.y_mean - c.x_mean.dot(coef);
  m.coef = std::move(coef);
  return m;
}

double soft_threshold(double rho, double alpha) {
  if (rho > alpha) return rho - alpha;
  if (rho < -alpha) return rho + alpha;
  return 0.0;
}

bool looks_standardized(const Matrix& X) {
  const double n = static_cast<double>(X.rows());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double mean = X.col(j).mean();
    const double sd = std::sqrt((X.col(j).array() - mean).square().sum() / n);
    if (sd == 0.0) continue;
    if (std::abs(mean) > 1e-6 || std::abs(sd - 1.0) > 1e-6) return false;
  }
  return true;
}

}  // namespace

Vector LinearModel::predict(const Matrix& X) const {
  if (X.cols() != coef.size()) {
    throw Error(ErrorKind::ShapeMismatch, "model expects " + std::to_string(coef.size()) + " features, got " +
                                              std::to_string(X.cols()));
  }
  return (X * coef).array() + intercept;
}

nlohmann::json LinearModel::to_json() const {
  return {{"model_type", model_type},
          {"coef", to_std_vector(coef)},
          {"intercept", intercept},
          {"hyperparams", hyperparams},
          {"convergence", convergence.to_json()}};
}

LinearModel LinearModel::from_json(const nlohmann::json& j) {
  LinearModel m;
  m.model_type = j.at("model_type").get<std::string>();
  m.coef = to_eigen(j.at("coef").get<std::vector<double>>());
  m.intercept = j.at("intercept").get<double>();
  m.hyperparams = j.value("hyperparams", nlohmann::json::object());
  if (j.contains("convergence")) m.convergence = Convergence::from_json(j["convergence"]);
  return m;
}

LinearModel fit_ols(const Matrix& X, const Vector& y) {
  require_fit_inputs(X, y);
  const Centered c = center(X, y);
  Eigen::ColPivHouseholderQR<Matrix> qr(c.X);
  Vector coef;
  Convergence conv;
  conv.flag = "closed_form";
  if (qr.rank() < c.X.cols()) {
    // minimum-norm least squares
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(c.X);
    coef = cod.solve(c.y);
    conv.flag = "rank_deficient";
  } else {
    coef = qr.solve(c.y);
  }
  LinearModel m = finish("ols", c, std::move(coef));
  m.convergence = conv;
  return m;
}

LinearModel fit_ridge(const Matrix& X, const Vector& y, double alpha) {
  if (!(alpha >= 0.0)) throw Error(ErrorKind::InvalidArgument, "ridge alpha must be >= 0");
  require_fit_inputs(X, y);
  LinearModel m;
  if (alpha == 0.0) {
    m = fit_ols(X, y);
  } else {
    const Centered c = center(X, y);
    Matrix gram = c.X.transpose() * c.X;
    gram.diagonal().array() += alpha;
    Vector coef = gram.ldlt().solve(c.X.transpose() * c.y);
    m = finish("ridge", c, std::move(coef));
    m.convergence.flag = "closed_form";
  }
  m.model_type = "ridge";
  m.hyperparams = {{"alpha", alpha}};
  return m;
}

double lasso_alpha_max(const Matrix& X, const Vector& y) {
  require_fit_inputs(X, y);
  const Centered c = center(X, y);
  return (c.X.transpose() * c.y).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
}

LinearModel fit_lasso(const Matrix& X, const Vector& y, const LassoOptions& opts) {
  if (!(opts.alpha >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lasso alpha must be >= 0");
  require_fit_inputs(X, y);
  const Centered c = center(X, y);
  const auto d = c.X.cols();
  const double n = static_cast<double>(c.X.rows());
  Vector z = c.X.colwise().squaredNorm().transpose() / n;
  Vector coef = Vector::Zero(d);
  Vector resid = c.y;

  Convergence conv;
  conv.flag = "not_converged";
  for (int it = 1; it <= opts.max_iter; ++it) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (z(j) == 0.0) continue;
      const double old = coef(j);
      const double rho = c.X.col(j).dot(resid) / n + z(j) * old;
      const double updated = soft_threshold(rho, opts.alpha) / z(j);
      if (updated != old) {
        resid -= c.X.col(j) * (updated - old);
        coef(j) = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    conv.iterations = it;
    if (max_change < opts.tol) {
      conv.flag = "converged";
      break;
    }
  }
  if (!looks_standardized(X)) conv.warnings.push_back("unstandardized_input");

  LinearModel m = finish("lasso", c, std::move(coef));
  m.hyperparams = {{"alpha", opts.alpha}, {"tol", opts.tol}, {"max_iter", opts.max_iter}};
  m.convergence = conv;
  return m;
}

LinearModel fit_bayesian_ridge(const Matrix& X, const Vector& y, const BayesianRidgeOptions& opts) {
  require_fit_inputs(X, y);
  if (X.rows() < 2) throw Error(ErrorKind::InvalidArgument, "Bayesian ridge needs n > 1");
  const Centered c = center(X, y);
  const double n = static_cast<double>(c.X.rows());

  Eigen::BDCSVD<Matrix> svd(c.X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector s = svd.singularValues();
  const Vector eig = s.array().square();
  const Vector uty = svd.matrixU().transpose() * c.y;
  const Matrix& V = svd.matrixV();

  const double var_y = c.y.squaredNorm() / n;
  double alpha = 1.0 / (var_y + std::numeric_limits<double>::epsilon());
  double lambda = 1.0;

  auto posterior_mean = [&](double a, double l) -> Vector {
    const Vector shrink = s.array() / (eig.array() + l / a);
    return V * shrink.cwiseProduct(uty);
  };

  Convergence conv;
  conv.flag = "not_converged";
  Vector coef = Vector::Zero(c.X.cols());
  Vector coef_old = coef;
  for (int it = 0; it < opts.max_iter; ++it) {
    coef = posterior_mean(alpha, lambda);
    const double rss = (c.y - c.X * coef).squaredNorm();
    const double gamma = ((alpha * eig.array()) / (lambda + alpha * eig.array())).sum();
    lambda = (gamma + 2.0 * opts.lambda_1) / (coef.squaredNorm() + 2.0 * opts.lambda_2);
    alpha = (n - gamma + 2.0 * opts.alpha_1) / (rss + 2.0 * opts.alpha_2);
    conv.iterations = it + 1;
    if (it > 0 && (coef_old - coef).cwiseAbs().maxCoeff() < opts.tol) {
      conv.flag = "converged";
      break;
    }
    coef_old = coef;
  }
  coef = posterior_mean(alpha, lambda);

  LinearModel m = finish("bayesian_ridge", c, std::move(coef));
  m.hyperparams = {{"max_iter", opts.max_iter},       {"tol", opts.tol},           {"alpha_1", opts.alpha_1},
                   {"alpha_2", opts.alpha_2},         {"lambda_1", opts.lambda_1}, {"lambda_2", opts.lambda_2},
                   {"alpha_noise", alpha},            {"lambda_weights", lambda}};
  m.convergence = conv;
  return m;
}

namespace {

// d/dsigma of sum_i [sigma + sigma * H(r_i / sigma)], H the unit Huber loss.
// Nondecreasing in sigma.
double scale_gradient(const Vector& abs_r, double delta, double sigma) {
  double g = 0.0;
  for (Eigen::Index i = 0; i < abs_r.size(); ++i) {
    const double a = abs_r(i);
    if (a <= delta * sigma) {
      g += 1.0 - (a * a) / (sigma * sigma);
    } else {
      g += 1.0 - delta * delta;
    }
  }
  return g;
}

double fit_scale(const Vector& abs_r, double delta) {
  const double max_r = abs_r.maxCoeff();
  if (max_r == 0.0) return 0.0;
  const double rms = std::sqrt(abs_r.squaredNorm() / static_cast<double>(abs_r.size()));
  double hi = 2.0 * std::max(rms, max_r / delta);
  double lo = hi * 1e-12;
  if (scale_gradient(abs_r, delta, lo) >= 0.0) return lo;
  // bisection in log space
  for (int k = 0; k < 200 && hi / lo > 1.0 + 1e-14; ++k) {
    const double mid = std::sqrt(lo * hi);
    if (scale_gradient(abs_r, delta, mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::sqrt(lo * hi);
}

// Weighted ridge with unpenalized intercept.
std::pair<Vector, double> weighted_ridge(const Matrix& X, const Vector& y, const Vector& w, double alpha) {
  const double wsum = w.sum();
  const Vector x_mean = (X.transpose() * w) / wsum;
  const double y_mean = w.dot(y) / wsum;
  const Matrix Xc = X.rowwise() - x_mean.transpose();
  const Vector yc = y.array() - y_mean;
  const Matrix XtW = Xc.transpose() * w.asDiagonal();
  Matrix gram = XtW * Xc;
  gram.diagonal().array() += alpha;
  Vector coef = gram.ldlt().solve(XtW * yc);
  if (!coef.allFinite()) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(gram);
    coef = cod.solve(XtW * yc);
  }
  return {coef, y_mean - x_mean.dot(coef)};
}

}  // namespace

LinearModel fit_huber(const Matrix& X, const Vector& y, const HuberOptions& opts) {
  if (!(opts.delta > 0.0)) throw Error(ErrorKind::InvalidArgument, "Huber delta must be > 0");
  if (!(opts.alpha >= 0.0)) throw Error(ErrorKind::InvalidArgument, "Huber alpha must be >= 0");
  require_fit_inputs(X, y);
  const auto n = X.rows();

  auto [coef, intercept] = weighted_ridge(X, y, Vector::Ones(n), opts.alpha);
  Vector abs_r = (y - X * coef).array() - intercept;
  abs_r = abs_r.cwiseAbs();
  double sigma = fit_scale(abs_r, opts.delta);

  Convergence conv;
  conv.flag = "not_converged";
  Vector weights(n);
  for (int it = 1; it <= opts.max_iter; ++it) {
    // quadratic majorizer of the scaled Huber loss around the current residuals
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = abs_r(i);
      weights(i) = (a <= opts.delta * sigma) ? 1.0 : opts.delta * sigma / a;
    }
    auto [next_coef, next_intercept] = weighted_ridge(X, y, weights, opts.alpha);
    abs_r = ((y - X * next_coef).array() - next_intercept).cwiseAbs();
    const double next_sigma = fit_scale(abs_r, opts.delta);

    double change = std::abs(next_intercept - intercept);
    change = std::max(change, (next_coef - coef).cwiseAbs().maxCoeff());
    change = std::max(change, std::abs(next_sigma - sigma));
    coef = std::move(next_coef);
    intercept = next_intercept;
    sigma = next_sigma;
    conv.iterations = it;
    if (change < opts.tol) {
      conv.flag = "converged";
      break;
    }
  }

  LinearModel m;
  m.model_type = "huber";
  m.coef = std::move(coef);
  m.intercept = intercept;
  m.hyperparams = {{"delta", opts.delta}, {"alpha", opts.alpha}, {"tol", opts.tol},
                   {"max_iter", opts.max_iter}, {"scale", sigma}};
  m.convergence = conv;
  return m;
}

// ---------------------------------------------------------------------------

LinearRegressor::LinearRegressor(std::string kind, nlohmann::json hyperparams)
    : kind_(std::move(kind)), hyperparams_(std::move(hyperparams)) {
  if (kind_ != "ols" && kind_ != "ridge" && kind_ != "lasso" && kind_ != "bayesian_ridge" && kind_ != "huber") {
    throw Error(ErrorKind::InvalidArgument, "unknown linear model '" + kind_ + "'");
  }
  if (hyperparams_.is_null()) hyperparams_ = nlohmann::json::object();
}

void LinearRegressor::fit(const Matrix& X, const Vector& y) {
  const auto& h = hyperparams_;
  if (kind_ == "ols") {
    model_ = fit_ols(X, y);
  } else if (kind_ == "ridge") {
    model_ = fit_ridge(X, y, h.value("alpha", 0.01));
  } else if (kind_ == "lasso") {
    LassoOptions o;
    o.alpha = h.value("alpha", o.alpha);
    o.tol = h.value("tol", o.tol);
    o.max_iter = h.value("max_iter", o.max_iter);
    model_ = fit_lasso(X, y, o);
  } else if (kind_ == "bayesian_ridge") {
    BayesianRidgeOptions o;
    o.max_iter = h.value("max_iter", o.max_iter);
    o.tol = h.value("tol", o.tol);
    model_ = fit_bayesian_ridge(X, y, o);
  } else {
    HuberOptions o;
    o.delta = h.value("delta", o.delta);
    o.alpha = h.value("alpha", o.alpha);
    o.tol = h.value("tol", o.tol);
    o.max_iter = h.value("max_iter", o.max_iter);
    model_ = fit_huber(X, y, o);
  }
  fitted_ = true;
}

Vector LinearRegressor::predict(const Matrix& X) const {
  if (!fitted_) throw Error(ErrorKind::NotFitted, kind_);
  return model_.predict(X);
}

nlohmann::json LinearRegressor::to_json() const {
  if (!fitted_) throw Error(ErrorKind::NotFitted, kind_);
  return model_.to_json();
}

std::unique_ptr<LinearRegressor> LinearRegressor::from_json(const nlohmann::json& j) {
  auto model = LinearModel::from_json(j);
  auto r = std::make_unique<LinearRegressor>(model.model_type, model.hyperparams);
  r->model_ = std::move(model);
  r->fitted_ = true;
  return r;
}

}  // namespace windbench::linear
