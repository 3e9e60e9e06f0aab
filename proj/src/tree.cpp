#include "windbench/tree.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace windbench::tree {

namespace {

struct Builder {
  const Matrix& X;
  const Vector& y;
  const TreeParams& params;
  Rng* rng;
  std::vector<TreeNode>& nodes;
  std::vector<std::pair<double, double>> scratch;  // (feature value, target)

  struct Best {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  std::vector<std::size_t> candidate_features() {
    const auto d = static_cast<std::size_t>(X.cols());
    std::vector<std::size_t> feats(d);
    std::iota(feats.begin(), feats.end(), std::size_t{0});
    if (params.max_features == 0 || params.max_features >= d || rng == nullptr) return feats;
    // partial Fisher-Yates, then ascending for the tie-break rule
    for (std::size_t i = 0; i < params.max_features; ++i) {
      std::swap(feats[i], feats[i + rng->index(d - i)]);
    }
    feats.resize(params.max_features);
    std::sort(feats.begin(), feats.end());
    return feats;
  }

  Best best_split(const std::vector<std::size_t>& rows, double total) {
    Best best;
    const std::size_t n = rows.size();
    const double parent = total * total / static_cast<double>(n);
    const std::size_t msl = std::max<std::size_t>(params.min_samples_leaf, 1);
    // gains within rounding of each other are ties, so the earlier candidate wins
    double sumsq = 0.0;
    for (std::size_t r : rows) sumsq += y(static_cast<Eigen::Index>(r)) * y(static_cast<Eigen::Index>(r));
    const double tie_tol = 1e-12 * sumsq;
    for (std::size_t f : candidate_features()) {
      scratch.clear();
      for (std::size_t r : rows) {
        scratch.emplace_back(X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)),
                             y(static_cast<Eigen::Index>(r)));
      }
      std::sort(scratch.begin(), scratch.end());
      double left_sum = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        left_sum += scratch[i - 1].second;
        const double a = scratch[i - 1].first;
        const double b = scratch[i].first;
        if (a == b) continue;
        if (i < msl || n - i < msl) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(i) +
                            right_sum * right_sum / static_cast<double>(n - i) - parent;
        if (gain > best.gain + tie_tol) {
          double thr = a + (b - a) / 2.0;
          if (!(thr >= a && thr < b)) thr = a;
          best.gain = gain;
          best.feature = static_cast<int>(f);
          best.threshold = thr;
        }
      }
    }
    return best;
  }

  int build(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    double total = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t r : rows) {
      const double v = y(static_cast<Eigen::Index>(r));
      total += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    nodes[id].samples = rows.size();
    nodes[id].value = total / static_cast<double>(rows.size());

    const bool depth_exhausted = params.max_depth >= 0 && depth >= params.max_depth;
    if (lo == hi || depth_exhausted || rows.size() < 2 * std::max<std::size_t>(params.min_samples_leaf, 1)) {
      return id;
    }
    const Best best = best_split(rows, total);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      if (X(static_cast<Eigen::Index>(r), best.feature) <= best.threshold) {
        left.push_back(r);
      } else {
        right.push_back(r);
      }
    }
    rows.clear();
    rows.shrink_to_fit();
    nodes[id].feature = best.feature;
    nodes[id].threshold = best.threshold;
    const int l = build(std::move(left), depth + 1);
    nodes[id].left = l;
    const int r = build(std::move(right), depth + 1);
    nodes[id].right = r;
    return id;
  }
};

template <typename Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn&& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  const unsigned n = std::min<unsigned>(jobs, static_cast<unsigned>(count));
  for (unsigned w = 0; w < n; ++w) {
    workers.emplace_back([&]() {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

void check_inputs(const Matrix& X, const Vector& y, const EnsembleOptions& opts) {
  require_fit_inputs(X, y);
  if (X.rows() < 2) throw Error(ErrorKind::InvalidArgument, "ensembles need n >= 2");
  if (opts.n_estimators == 0) throw Error(ErrorKind::InvalidArgument, "n_estimators must be >= 1");
}

}  // namespace

RegressionTree RegressionTree::fit(const Matrix& X, const Vector& y, std::span<const std::size_t> rows,
                                   const TreeParams& params, Rng* rng) {
  if (rows.empty()) throw Error(ErrorKind::Empty, "tree needs at least one row");
  if (rows.size() < params.min_samples_leaf) {
    throw Error(ErrorKind::InvalidArgument, "fewer rows than min_samples_leaf");
  }
  RegressionTree tree;
  tree.n_features_ = static_cast<std::size_t>(X.cols());
  Builder b{X, y, params, rng, tree.nodes_, {}};
  b.build(std::vector<std::size_t>(rows.begin(), rows.end()), 0);
  return tree;
}

double RegressionTree::predict_row(const Matrix& X, Eigen::Index row) const {
  int id = 0;
  while (nodes_[id].feature >= 0) {
    const auto& node = nodes_[id];
    id = X(row, node.feature) <= node.threshold ? node.left : node.right;
  }
  return nodes_[id].value;
}

Vector RegressionTree::predict(const Matrix& X) const {
  if (nodes_.empty()) throw Error(ErrorKind::NotFitted, "regression tree");
  if (static_cast<std::size_t>(X.cols()) != n_features_) {
    throw Error(ErrorKind::ShapeMismatch, "tree expects " + std::to_string(n_features_) + " features");
  }
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict_row(X, i);
  return out;
}

int RegressionTree::depth() const {
  std::vector<int> depth(nodes_.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, depth[i]);
    if (nodes_[i].feature >= 0) {
      depth[static_cast<std::size_t>(nodes_[i].left)] = depth[i] + 1;
      depth[static_cast<std::size_t>(nodes_[i].right)] = depth[i] + 1;
    }
  }
  return best;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

nlohmann::json RegressionTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) {
    if (n.feature < 0) {
      nodes.push_back({{"value", n.value}, {"samples", n.samples}});
    } else {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"value", n.value},
                       {"samples", n.samples}});
    }
  }
  return {{"n_features", n_features_}, {"nodes", nodes}};
}

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
  RegressionTree t;
  t.n_features_ = j.at("n_features").get<std::size_t>();
  for (const auto& n : j.at("nodes")) {
    TreeNode node;
    node.value = n.at("value").get<double>();
    node.samples = n.value("samples", std::size_t{0});
    if (n.contains("feature")) {
      node.feature = n["feature"].get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    }
    t.nodes_.push_back(node);
  }
  const auto count = static_cast<int>(t.nodes_.size());
  for (const auto& n : t.nodes_) {
    if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count)) {
      throw Error(ErrorKind::Format, "tree node references out of range");
    }
  }
  if (t.nodes_.empty()) throw Error(ErrorKind::Format, "tree without nodes");
  return t;
}

RegressionTree fit_tree(const Matrix& X, const Vector& y, const TreeParams& params, Rng& rng) {
  require_fit_inputs(X, y);
  std::vector<std::size_t> rows(static_cast<std::size_t>(X.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return RegressionTree::fit(X, y, rows, params, &rng);
}

// ---------------------------------------------------------------------------
// ensembles

std::string_view to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::Bagging: return "bagging";
    case EnsembleKind::RandomForest: return "random_forest";
    case EnsembleKind::AdaBoostR2: return "adaboost_r2";
  }
  return "bagging";
}

Rng tree_rng(std::uint64_t seed, std::size_t tree_index) {
  return Rng(seed ^ static_cast<std::uint64_t>(tree_index));
}

double weighted_median(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size() || values.empty()) {
    throw Error(ErrorKind::LengthMismatch, "weighted median inputs");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double cum = 0.0;
  for (std::size_t k : order) {
    cum += weights[k];
    if (cum >= 0.5 * total) return values[k];
  }
  return values[order.back()];
}

std::vector<std::size_t> weighted_bootstrap(std::span<const double> weights, std::size_t n, Rng& rng) {
  std::vector<double> cdf(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cdf.begin());
  const double total = cdf.back();
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    r = std::min(static_cast<std::size_t>(it - cdf.begin()), weights.size() - 1);
  }
  return rows;
}

namespace {

Ensemble fit_averaged(EnsembleKind kind, const Matrix& X, const Vector& y, const EnsembleOptions& opts) {
  check_inputs(X, y, opts);
  const auto n = static_cast<std::size_t>(X.rows());
  Ensemble ens;
  ens.kind = kind;
  ens.options = opts;
  ens.trees.resize(opts.n_estimators);
  parallel_for(opts.n_estimators, opts.jobs, [&](std::size_t t) {
    Rng rng = tree_rng(opts.seed, t);
    std::vector<std::size_t> rows(n);
    if (opts.bootstrap) {
      for (auto& r : rows) r = rng.index(n);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    ens.trees[t] = RegressionTree::fit(X, y, rows, opts.tree, &rng);
  });
  ens.convergence.flag = "converged";
  ens.convergence.iterations = static_cast<int>(opts.n_estimators);
  return ens;
}

}  // namespace

Ensemble fit_bagging(const Matrix& X, const Vector& y, const EnsembleOptions& opts) {
  EnsembleOptions o = opts;
  o.tree.max_features = 0;
  return fit_averaged(EnsembleKind::Bagging, X, y, o);
}

Ensemble fit_random_forest(const Matrix& X, const Vector& y, std::size_t max_features, EnsembleOptions opts) {
  const auto d = static_cast<std::size_t>(X.cols());
  if (max_features == 0) max_features = (d + 2) / 3;
  if (max_features > d) {
    throw Error(ErrorKind::InvalidArgument, "max_features must be <= number of features");
  }
  opts.tree.max_features = max_features;
  return fit_averaged(EnsembleKind::RandomForest, X, y, opts);
}

Ensemble fit_adaboost_r2(const Matrix& X, const Vector& y, const EnsembleOptions& opts) {
  check_inputs(X, y, opts);
  if (!(opts.learning_rate > 0.0)) throw Error(ErrorKind::InvalidArgument, "learning_rate must be > 0");
  const auto n = static_cast<std::size_t>(X.rows());
  Ensemble ens;
  ens.kind = EnsembleKind::AdaBoostR2;
  ens.options = opts;
  ens.options.tree.max_features = 0;

  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  for (std::size_t round = 0; round < opts.n_estimators; ++round) {
    Rng rng = tree_rng(opts.seed, round);
    const auto rows = weighted_bootstrap(w, n, rng);
    RegressionTree tree = RegressionTree::fit(X, y, rows, ens.options.tree, nullptr);
    const Vector pred = tree.predict(X);
    const Vector err = (pred - y).cwiseAbs();
    const double max_err = err.maxCoeff();
    Vector loss = max_err > 0.0 ? Vector(err / max_err) : Vector::Zero(static_cast<Eigen::Index>(n));

    double avg_loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) avg_loss += w[i] * loss(static_cast<Eigen::Index>(i));
    ens.convergence.iterations = static_cast<int>(round + 1);

    if (avg_loss >= 0.5) {
      if (round == 0) {
        // nothing better than a single tree is available
        ens.trees.push_back(std::move(tree));
        ens.estimator_weights.push_back(1.0);
        ens.betas.push_back(avg_loss / (1.0 - avg_loss));
        ens.average_losses.push_back(avg_loss);
        ens.convergence.flag = "all_rounds_rejected";
      }
      break;
    }
    const double beta = std::max(avg_loss / (1.0 - avg_loss), 1e-10);
    ens.trees.push_back(std::move(tree));
    ens.betas.push_back(beta);
    ens.average_losses.push_back(avg_loss);
    ens.estimator_weights.push_back(opts.learning_rate * std::log(1.0 / beta));

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] *= std::pow(beta, (1.0 - loss(static_cast<Eigen::Index>(i))) * opts.learning_rate);
      total += w[i];
    }
    for (auto& wi : w) wi /= total;
  }
  if (ens.convergence.flag != "all_rounds_rejected") ens.convergence.flag = "converged";
  return ens;
}

Vector Ensemble::predict(const Matrix& X) const {
  if (trees.empty()) throw Error(ErrorKind::NotFitted, std::string(to_string(kind)));
  const auto m = X.rows();
  if (kind != EnsembleKind::AdaBoostR2) {
    Vector sum = Vector::Zero(m);
    for (const auto& t : trees) sum += t.predict(X);
    return sum / static_cast<double>(trees.size());
  }
  std::vector<Vector> preds;
  preds.reserve(trees.size());
  for (const auto& t : trees) preds.push_back(t.predict(X));
  Vector out(m);
  std::vector<double> vals(trees.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < trees.size(); ++t) vals[t] = preds[t](i);
    out(i) = weighted_median(vals, estimator_weights);
  }
  return out;
}

nlohmann::json Ensemble::to_json() const {
  nlohmann::json ts = nlohmann::json::array();
  for (const auto& t : trees) ts.push_back(t.to_json());
  nlohmann::json j{{"model_type", to_string(kind)},
                   {"hyperparams",
                    {{"n_estimators", options.n_estimators},
                     {"max_depth", options.tree.max_depth},
                     {"min_samples_leaf", options.tree.min_samples_leaf},
                     {"max_features", options.tree.max_features},
                     {"seed", options.seed},
                     {"bootstrap", options.bootstrap},
                     {"learning_rate", options.learning_rate}}},
                   {"convergence", convergence.to_json()},
                   {"trees", ts}};
  if (kind == EnsembleKind::AdaBoostR2) {
    j["estimator_weights"] = estimator_weights;
    j["betas"] = betas;
    j["average_losses"] = average_losses;
  }
  return j;
}

Ensemble Ensemble::from_json(const nlohmann::json& j) {
  Ensemble e;
  const auto type = j.at("model_type").get<std::string>();
  if (type == "bagging") {
    e.kind = EnsembleKind::Bagging;
  } else if (type == "random_forest") {
    e.kind = EnsembleKind::RandomForest;
  } else if (type == "adaboost_r2") {
    e.kind = EnsembleKind::AdaBoostR2;
  } else {
    throw Error(ErrorKind::Format, "not an ensemble: " + type);
  }
  const auto& h = j.at("hyperparams");
  e.options.n_estimators = h.value("n_estimators", std::size_t{100});
  e.options.tree.max_depth = h.value("max_depth", -1);
  e.options.tree.min_samples_leaf = h.value("min_samples_leaf", std::size_t{1});
  e.options.tree.max_features = h.value("max_features", std::size_t{0});
  e.options.seed = h.value("seed", std::uint64_t{0});
  e.options.bootstrap = h.value("bootstrap", true);
  e.options.learning_rate = h.value("learning_rate", 1.0);
  if (j.contains("convergence")) e.convergence = Convergence::from_json(j["convergence"]);
  for (const auto& t : j.at("trees")) e.trees.push_back(RegressionTree::from_json(t));
  if (e.kind == EnsembleKind::AdaBoostR2) {
    e.estimator_weights = j.at("estimator_weights").get<std::vector<double>>();
    e.betas = j.value("betas", std::vector<double>{});
    e.average_losses = j.value("average_losses", std::vector<double>{});
    if (e.estimator_weights.size() != e.trees.size()) throw Error(ErrorKind::Format, "weights/trees length");
  }
  return e;
}

// ---------------------------------------------------------------------------

EnsembleRegressor::EnsembleRegressor(EnsembleKind kind, nlohmann::json hyperparams)
    : kind_(kind), hyperparams_(hyperparams.is_null() ? nlohmann::json::object() : std::move(hyperparams)) {}

void EnsembleRegressor::fit(const Matrix& X, const Vector& y) {
  const auto& h = hyperparams_;
  EnsembleOptions o;
  o.n_estimators = h.value("n_estimators", o.n_estimators);
  o.seed = h.value("seed", o.seed);
  o.jobs = h.value("jobs", 1u);
  o.tree.min_samples_leaf = h.value("min_samples_leaf", o.tree.min_samples_leaf);
  const int default_depth = kind_ == EnsembleKind::AdaBoostR2 ? 3 : -1;
  o.tree.max_depth = (h.contains("max_depth") && !h["max_depth"].is_null()) ? h["max_depth"].get<int>()
                                                                            : default_depth;
  o.learning_rate = h.value("learning_rate", o.learning_rate);
  switch (kind_) {
    case EnsembleKind::Bagging:
      ensemble_ = fit_bagging(X, y, o);
      break;
    case EnsembleKind::RandomForest: {
      const std::size_t mf = (h.contains("max_features") && !h["max_features"].is_null())
                                 ? h["max_features"].get<std::size_t>()
                                 : 0;
      ensemble_ = fit_random_forest(X, y, mf, o);
      break;
    }
    case EnsembleKind::AdaBoostR2:
      ensemble_ = fit_adaboost_r2(X, y, o);
      break;
  }
  fitted_ = true;
}

Vector EnsembleRegressor::predict(const Matrix& X) const {
  if (!fitted_) throw Error(ErrorKind::NotFitted, model_type());
  return ensemble_.predict(X);
}

nlohmann::json EnsembleRegressor::to_json() const {
  if (!fitted_) throw Error(ErrorKind::NotFitted, model_type());
  return ensemble_.to_json();
}

std::unique_ptr<EnsembleRegressor> EnsembleRegressor::from_json(const nlohmann::json& j) {
  Ensemble e = Ensemble::from_json(j);
  auto r = std::make_unique<EnsembleRegressor>(e.kind, j.at("hyperparams"));
  r->ensemble_ = std::move(e);
  r->fitted_ = true;
  return r;
}

}  // namespace windbench::tree
