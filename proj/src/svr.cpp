#include "windbench/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace windbench::svr {

double Kernel::operator()(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                          const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
  switch (type) {
    case KernelType::Rbf: return std::exp(-gamma * (a - b).squaredNorm());
    case KernelType::Linear: return a.dot(b);
    case KernelType::Poly: return std::pow(gamma * a.dot(b) + coef0, degree);
  }
  return 0.0;
}

nlohmann::json Kernel::to_json() const {
  switch (type) {
    case KernelType::Rbf: return {{"type", "rbf"}, {"gamma", gamma}};
    case KernelType::Linear: return {{"type", "linear"}};
    case KernelType::Poly: return {{"type", "poly"}, {"gamma", gamma}, {"degree", degree}, {"coef0", coef0}};
  }
  return {};
}

Kernel Kernel::from_json(const nlohmann::json& j) {
  Kernel k;
  const auto type = j.value("type", std::string("rbf"));
  if (type == "rbf") {
    k.type = KernelType::Rbf;
  } else if (type == "linear") {
    k.type = KernelType::Linear;
  } else if (type == "poly") {
    k.type = KernelType::Poly;
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown kernel '" + type + "'");
  }
  if (j.contains("gamma") && j["gamma"].is_number()) k.gamma = j["gamma"].get<double>();
  k.degree = j.value("degree", k.degree);
  k.coef0 = j.value("coef0", k.coef0);
  return k;
}

double scale_gamma(const Matrix& X) {
  const double var = (X.array() - X.mean()).square().mean();
  if (!(var > 0.0)) return 1.0;
  return 1.0 / (static_cast<double>(X.cols()) * var);
}

Matrix gram_matrix(const Kernel& k, const Matrix& X) {
  const auto n = X.rows();
  Matrix K(n, n);
  if (k.type == KernelType::Rbf) {
    const Vector sq = X.rowwise().squaredNorm();
    const Matrix dots = X * X.transpose();
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d2 = std::max(sq(i) + sq(j) - 2.0 * dots(i, j), 0.0);
        K(i, j) = std::exp(-k.gamma * d2);
      }
      K(j, j) = 1.0;
    }
    return K;
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      K(i, j) = K(j, i) = k(X.row(i), X.row(j));
    }
  }
  return K;
}

double dual_objective(const Matrix& K, const Vector& y, double epsilon, const Vector& beta) {
  return 0.5 * beta.dot(K * beta) + epsilon * beta.cwiseAbs().sum() - y.dot(beta);
}

namespace {

constexpr double kTau = 1e-12;

// Rows of the n x n kernel matrix; fully materialized for moderate n,
// otherwise recomputed on demand with a two-row cache.
class KernelRows {
 public:
  KernelRows(const Kernel& k, const Matrix& X) : kernel_(k), X_(X) {
    const auto n = X.rows();
    if (n <= kFullLimit) {
      full_ = gram_matrix(k, X);
    } else {
      cache_rows_[0].resize(n);
      cache_rows_[1].resize(n);
    }
  }

  const double* row(Eigen::Index i) {
    if (full_.size() > 0) return full_.col(i).data();  // symmetric
    for (int s = 0; s < 2; ++s) {
      if (cache_ids_[s] == i) {
        last_ = s;
        return cache_rows_[s].data();
      }
    }
    const int slot = 1 - last_;
    for (Eigen::Index j = 0; j < X_.rows(); ++j) cache_rows_[slot](j) = kernel_(X_.row(i), X_.row(j));
    cache_ids_[slot] = i;
    last_ = slot;
    return cache_rows_[slot].data();
  }

  double diag(Eigen::Index i) const { return kernel_(X_.row(i), X_.row(i)); }

 private:
  static constexpr Eigen::Index kFullLimit = 8000;
  const Kernel& kernel_;
  const Matrix& X_;
  Matrix full_;
  Vector cache_rows_[2];
  Eigen::Index cache_ids_[2] = {-1, -1};
  int last_ = 0;
};

}  // namespace

SvrFit fit_svr_full(const Matrix& X, const Vector& y, const SvrOptions& opts) {
  require_fit_inputs(X, y);
  if (!(opts.C > 0.0)) throw Error(ErrorKind::InvalidArgument, "SVR C must be > 0");
  if (!(opts.epsilon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "SVR epsilon must be >= 0");

  Kernel kernel = opts.kernel;
  if (opts.gamma_scale && kernel.type != KernelType::Linear) kernel.gamma = scale_gamma(X);

  const Eigen::Index n = X.rows();
  const Eigen::Index l = 2 * n;
  const double C = opts.C;
  KernelRows rows(kernel, X);

  // Variables a = [alpha; alpha*], signs z = [+1; -1], linear term p.
  std::vector<double> a(static_cast<std::size_t>(l), 0.0);
  std::vector<double> G(static_cast<std::size_t>(l));
  std::vector<double> QD(static_cast<std::size_t>(l));
  std::vector<signed char> z(static_cast<std::size_t>(l));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const auto v = static_cast<std::size_t>(i + n);
    z[u] = 1;
    z[v] = -1;
    G[u] = opts.epsilon - y(i);
    G[v] = opts.epsilon + y(i);
    QD[u] = QD[v] = rows.diag(i);
  }
  auto orig = [n](Eigen::Index t) { return t < n ? t : t - n; };
  auto at_upper = [&](Eigen::Index t) { return a[static_cast<std::size_t>(t)] >= C; };
  auto at_lower = [&](Eigen::Index t) { return a[static_cast<std::size_t>(t)] <= 0.0; };

  Convergence conv;
  conv.flag = "not_converged";
  long iter = 0;
  while (true) {
    // second-order working set selection
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < l; ++t) {
      const auto u = static_cast<std::size_t>(t);
      if (z[u] == 1) {
        if (!at_upper(t) && -G[u] >= gmax) {
          gmax = -G[u];
          i = t;
        }
      } else if (!at_lower(t) && G[u] >= gmax) {
        gmax = G[u];
        i = t;
      }
    }
    Eigen::Index j = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    if (i >= 0) {
      const double* Ki = rows.row(orig(i));
      const auto ui = static_cast<std::size_t>(i);
      for (Eigen::Index t = 0; t < l; ++t) {
        const auto u = static_cast<std::size_t>(t);
        // z_i * Q_it = z_t * K(i, t)
        const double ziQit = z[u] * Ki[orig(t)];
        if (z[u] == 1) {
          if (at_lower(t)) continue;
          const double grad_diff = gmax + G[u];
          gmax2 = std::max(gmax2, G[u]);
          if (grad_diff > 0.0) {
            const double quad = QD[ui] + QD[u] - 2.0 * ziQit;
            const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
            if (obj <= best_obj) {
              j = t;
              best_obj = obj;
            }
          }
        } else {
          if (at_upper(t)) continue;
          const double grad_diff = gmax - G[u];
          gmax2 = std::max(gmax2, -G[u]);
          if (grad_diff > 0.0) {
            const double quad = QD[ui] + QD[u] + 2.0 * ziQit;
            const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
            if (obj <= best_obj) {
              j = t;
              best_obj = obj;
            }
          }
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < opts.tol) {
      conv.flag = "converged";
      break;
    }
    if (iter >= opts.max_iter) break;
    ++iter;

    const auto ui = static_cast<std::size_t>(i);
    const auto uj = static_cast<std::size_t>(j);
    const double* Ki = rows.row(orig(i));
    const double Kij = Ki[orig(j)];
    const double Qij = z[ui] * z[uj] * Kij;
    const double old_ai = a[ui];
    const double old_aj = a[uj];
    double& ai = a[ui];
    double& aj = a[uj];
    if (z[ui] != z[uj]) {
      double quad = QD[ui] + QD[uj] + 2.0 * Qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-G[ui] - G[uj]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) {
          aj = 0.0;
          ai = diff;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = -diff;
      }
      if (diff > 0.0) {
        if (ai > C) {
          ai = C;
          aj = C - diff;
        }
      } else if (aj > C) {
        aj = C;
        ai = C + diff;
      }
    } else {
      double quad = QD[ui] + QD[uj] - 2.0 * Qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (G[ui] - G[uj]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C) {
        if (ai > C) {
          ai = C;
          aj = sum - C;
        }
      } else if (aj < 0.0) {
        aj = 0.0;
        ai = sum;
      }
      if (sum > C) {
        if (aj > C) {
          aj = C;
          ai = sum - C;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = sum;
      }
    }
    const double dai = (ai - old_ai) * z[ui];
    const double daj = (aj - old_aj) * z[uj];
    // G_t += Q_ti dai_raw + Q_tj daj_raw, with Q_ts = z_t z_s K(t, s)
    const double* Kr = rows.row(orig(i));
    const double* Kj = rows.row(orig(j));  // two-slot cache keeps Kr valid
    for (Eigen::Index t = 0; t < l; ++t) {
      const auto u = static_cast<std::size_t>(t);
      const auto o = orig(t);
      G[u] += z[u] * (Kr[o] * dai + Kj[o] * daj);
    }
  }
  conv.iterations = static_cast<int>(std::min<long>(iter, std::numeric_limits<int>::max()));

  // bias from the free variables, else the midpoint of the feasible interval
  double ub = std::numeric_limits<double>::infinity();
  double lb = -ub;
  double sum_free = 0.0;
  long n_free = 0;
  for (Eigen::Index t = 0; t < l; ++t) {
    const auto u = static_cast<std::size_t>(t);
    const double yG = z[u] * G[u];
    if (at_upper(t)) {
      if (z[u] == -1) {
        ub = std::min(ub, yG);
      } else {
        lb = std::max(lb, yG);
      }
    } else if (at_lower(t)) {
      if (z[u] == 1) {
        ub = std::min(ub, yG);
      } else {
        lb = std::max(lb, yG);
      }
    } else {
      ++n_free;
      sum_free += yG;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

  SvrFit fit;
  fit.beta.resize(n);
  double obj = 0.0;
  for (Eigen::Index t = 0; t < l; ++t) {
    const auto u = static_cast<std::size_t>(t);
    const double p = z[u] == 1 ? opts.epsilon - y(orig(t)) : opts.epsilon + y(orig(t));
    obj += a[u] * (G[u] + p);
  }
  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < n; ++i) {
    fit.beta(i) = a[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(i + n)];
    if (fit.beta(i) != 0.0) sv.push_back(i);
  }
  SvrModel& m = fit.model;
  m.kernel = kernel;
  m.C = C;
  m.epsilon = opts.epsilon;
  m.bias = -rho;
  m.objective = 0.5 * obj;
  m.convergence = conv;
  m.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), X.cols());
  m.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    m.support_vectors.row(static_cast<Eigen::Index>(k)) = X.row(sv[k]);
    m.dual_coef(static_cast<Eigen::Index>(k)) = fit.beta(sv[k]);
  }
  return fit;
}

SvrModel fit_svr(const Matrix& X, const Vector& y, const SvrOptions& opts) {
  return fit_svr_full(X, y, opts).model;
}

Vector SvrModel::predict(const Matrix& X) const {
  if (support_vectors.rows() > 0 && X.cols() != support_vectors.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "SVR feature count");
  }
  Vector out = Vector::Constant(X.rows(), bias);
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < support_vectors.rows(); ++k) {
      s += dual_coef(k) * kernel(support_vectors.row(k), X.row(r));
    }
    out(r) += s;
  }
  return out;
}

Vector predict_svr(const SvrModel& model, const Matrix& X) { return model.predict(X); }

nlohmann::json SvrModel::to_json() const {
  nlohmann::json svs = nlohmann::json::array();
  for (Eigen::Index k = 0; k < support_vectors.rows(); ++k) {
    std::vector<double> row(static_cast<std::size_t>(support_vectors.cols()));
    for (Eigen::Index c = 0; c < support_vectors.cols(); ++c) row[static_cast<std::size_t>(c)] = support_vectors(k, c);
    svs.push_back(row);
  }
  return {{"model_type", "svr"},
          {"hyperparams", {{"C", C}, {"epsilon", epsilon}, {"kernel", kernel.to_json()}}},
          {"n_features", support_vectors.cols()},
          {"support_vectors", svs},
          {"dual_coef", to_std_vector(dual_coef)},
          {"bias", bias},
          {"objective", objective},
          {"convergence", convergence.to_json()}};
}

SvrModel SvrModel::from_json(const nlohmann::json& j) {
  SvrModel m;
  const auto& h = j.at("hyperparams");
  m.C = h.at("C").get<double>();
  m.epsilon = h.at("epsilon").get<double>();
  m.kernel = Kernel::from_json(h.at("kernel"));
  m.bias = j.at("bias").get<double>();
  m.objective = j.value("objective", 0.0);
  m.dual_coef = to_eigen(j.at("dual_coef").get<std::vector<double>>());
  const auto d = j.at("n_features").get<Eigen::Index>();
  const auto& svs = j.at("support_vectors");
  m.support_vectors.resize(static_cast<Eigen::Index>(svs.size()), d);
  for (std::size_t k = 0; k < svs.size(); ++k) {
    const auto row = svs[k].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != d) throw Error(ErrorKind::Format, "support vector width");
    for (Eigen::Index c = 0; c < d; ++c) m.support_vectors(static_cast<Eigen::Index>(k), c) = row[static_cast<std::size_t>(c)];
  }
  if (m.dual_coef.size() != m.support_vectors.rows()) throw Error(ErrorKind::Format, "dual_coef length");
  if (j.contains("convergence")) m.convergence = Convergence::from_json(j["convergence"]);
  return m;
}

// ---------------------------------------------------------------------------

SvrRegressor::SvrRegressor(nlohmann::json hyperparams)
    : hyperparams_(hyperparams.is_null() ? nlohmann::json::object() : std::move(hyperparams)) {}

void SvrRegressor::fit(const Matrix& X, const Vector& y) {
  const auto& h = hyperparams_;
  SvrOptions o;
  o.C = h.value("C", o.C);
  o.epsilon = h.value("epsilon", o.epsilon);
  o.tol = h.value("tol", o.tol);
  o.max_iter = h.value("max_iter", o.max_iter);
  if (h.contains("kernel")) o.kernel = Kernel::from_json(h["kernel"]);
  const bool explicit_gamma = h.contains("kernel") && h["kernel"].contains("gamma") && h["kernel"]["gamma"].is_number();
  o.gamma_scale = !explicit_gamma;
  model_ = fit_svr(X, y, o);
  fitted_ = true;
}

Vector SvrRegressor::predict(const Matrix& X) const {
  if (!fitted_) throw Error(ErrorKind::NotFitted, "svr");
  return model_.predict(X);
}

nlohmann::json SvrRegressor::to_json() const {
  if (!fitted_) throw Error(ErrorKind::NotFitted, "svr");
  return model_.to_json();
}

std::unique_ptr<SvrRegressor> SvrRegressor::from_json(const nlohmann::json& j) {
  auto m = SvrModel::from_json(j);
  auto r = std::make_unique<SvrRegressor>(j.at("hyperparams"));
  r->model_ = std::move(m);
  r->fitted_ = true;
  return r;
}

}  // namespace windbench::svr
