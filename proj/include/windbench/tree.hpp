#pragma once

// CART regression trees and the three tree ensembles (bagging, random forest,
// AdaBoost.R2).

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "windbench/regressor.hpp"

namespace windbench::tree {

struct TreeParams {
  int max_depth = -1;                // < 0: unlimited
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;      // 0 or >= d: every feature at every node
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean target of the training rows reaching this node
  std::size_t samples = 0;
};

/// Greedy variance-reduction tree. Split candidates are midpoints between
/// consecutive distinct sorted feature values; x <= threshold goes left.
/// Ties go to the lowest feature index, then the lowest threshold.
class RegressionTree {
 public:
  /// Fit on the given row multiset (duplicates allowed, as in a bootstrap).
  /// `rng` is consulted only when params.max_features < X.cols().
  static RegressionTree fit(const Matrix& X, const Vector& y, std::span<const std::size_t> rows,
                            const TreeParams& params, Rng* rng);

  [[nodiscard]] double predict_row(const Matrix& X, Eigen::Index row) const;
  [[nodiscard]] Vector predict(const Matrix& X) const;

  [[nodiscard]] const std::vector<TreeNode>& nodes() const { return nodes_; }
  [[nodiscard]] int depth() const;
  [[nodiscard]] std::size_t leaf_count() const;
  [[nodiscard]] std::size_t n_features() const { return n_features_; }

  [[nodiscard]] nlohmann::json to_json() const;
  static RegressionTree from_json(const nlohmann::json& j);

 private:
  std::vector<TreeNode> nodes_;
  std::size_t n_features_ = 0;
};

RegressionTree fit_tree(const Matrix& X, const Vector& y, const TreeParams& params, Rng& rng);

enum class EnsembleKind { Bagging, RandomForest, AdaBoostR2 };
std::string_view to_string(EnsembleKind k);

struct EnsembleOptions {
  std::size_t n_estimators = 100;
  TreeParams tree;
  std::uint64_t seed = 0;
  bool bootstrap = true;       // bagging/RF; false fits every tree on all rows
  double learning_rate = 1.0;  // AdaBoost.R2
  unsigned jobs = 1;           // worker threads for bagging/RF
};

class Ensemble {
 public:
  EnsembleKind kind = EnsembleKind::Bagging;
  std::vector<RegressionTree> trees;
  std::vector<double> estimator_weights;  // AdaBoost.R2: learning_rate * ln(1/beta)
  std::vector<double> betas;              // AdaBoost.R2 per accepted round
  std::vector<double> average_losses;     // AdaBoost.R2 per accepted round
  EnsembleOptions options;
  Convergence convergence;

  [[nodiscard]] Vector predict(const Matrix& X) const;
  [[nodiscard]] nlohmann::json to_json() const;
  static Ensemble from_json(const nlohmann::json& j);
};

/// Bootstrap draw of n rows for tree `tree_index`; the same stream then drives
/// that tree's feature subsampling.
Rng tree_rng(std::uint64_t seed, std::size_t tree_index);

Ensemble fit_bagging(const Matrix& X, const Vector& y, const EnsembleOptions& opts);
/// max_features == 0 selects ceil(d / 3).
Ensemble fit_random_forest(const Matrix& X, const Vector& y, std::size_t max_features, EnsembleOptions opts);
Ensemble fit_adaboost_r2(const Matrix& X, const Vector& y, const EnsembleOptions& opts);

/// Smallest value m with cumulative weight (sorted by value) >= half the total.
double weighted_median(std::span<const double> values, std::span<const double> weights);

/// Draw n indices with probability proportional to `weights` (inverse CDF).
std::vector<std::size_t> weighted_bootstrap(std::span<const double> weights, std::size_t n, Rng& rng);

class EnsembleRegressor final : public Regressor {
 public:
  EnsembleRegressor(EnsembleKind kind, nlohmann::json hyperparams);

  [[nodiscard]] std::string model_type() const override { return std::string(to_string(kind_)); }
  void fit(const Matrix& X, const Vector& y) override;
  [[nodiscard]] Vector predict(const Matrix& X) const override;
  [[nodiscard]] bool fitted() const override { return fitted_; }
  [[nodiscard]] nlohmann::json to_json() const override;

  static std::unique_ptr<EnsembleRegressor> from_json(const nlohmann::json& j);
  [[nodiscard]] const Ensemble& ensemble() const { return ensemble_; }

 private:
  EnsembleKind kind_;
  nlohmann::json hyperparams_;
  Ensemble ensemble_;
  bool fitted_ = false;
};

}  // namespace windbench::tree
