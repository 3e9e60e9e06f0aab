#pragma once

// Slow reference implementations used only by the tests. They work on plain
// std::vector data and loops so they share no numerical code with the library.

#include <cstdint>
#include <optional>
#include <vector>

#include "windbench/common.hpp"

namespace oracle {

using Rows = std::vector<std::vector<double>>;

Rows to_rows(const windbench::Matrix& X);
std::vector<double> to_vec(const windbench::Vector& v);

struct Metrics {
  double mae, mse, medae;
  std::optional<double> r2;  // empty when the actuals have no spread
};
Metrics metrics(const std::vector<double>& y, const std::vector<double>& yhat);

/// Gaussian elimination with partial pivoting.
std::vector<double> solve(Rows A, std::vector<double> b);
Rows inverse(const Rows& A);

struct Linear {
  std::vector<double> coef;
  double intercept = 0.0;
};
/// Normal equations on centered data, (Xc'Xc + alpha I) w = Xc'yc.
Linear ridge(const Rows& X, const std::vector<double>& y, double alpha);
/// One-feature lasso on (1/2n) RSS + alpha |w|.
Linear lasso_1d(const std::vector<double>& x, const std::vector<double>& y, double alpha);

struct EvidenceResidual {
  double coef;    // max |w - posterior mean|
  double lambda;  // relative error of the lambda update
  double alpha;   // relative error of the alpha update
};
/// How far (coef, alpha, lambda) is from a fixed point of evidence maximization.
EvidenceResidual evidence_fixed_point(const Rows& X, const std::vector<double>& y, const std::vector<double>& coef,
                                      double alpha, double lambda, double hyper = 1e-6);

struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  double value = 0.0;
  int left = -1, right = -1;
  std::size_t samples = 0;
};
/// Exhaustive CART: every feature, every midpoint, gain measured as the drop in
/// sum of squared deviations. Nodes are numbered in preorder.
std::vector<TreeNode> tree(const Rows& X, const std::vector<double>& y, const std::vector<std::size_t>& rows,
                           int max_depth, std::size_t min_samples_leaf = 1);
double tree_predict(const std::vector<TreeNode>& nodes, const std::vector<double>& x);

struct AdaBoostRound {
  double average_loss;
  double beta;
};
/// AdaBoost.R2 with linear loss and learning rate 1, stepped by hand. The
/// resampling draws from windbench::Rng(seed ^ round) by inverse CDF.
std::vector<AdaBoostRound> adaboost_r2(const Rows& X, const std::vector<double>& y, std::size_t rounds,
                                       int max_depth, std::uint64_t seed);

struct SvrDual {
  std::vector<double> beta;  // alpha - alpha*
  double objective;
};
/// Accelerated projected gradient on the split (alpha, alpha*) dual of
/// epsilon-SVR. The projection onto the box and the equality constraint is
/// found by bisection on its multiplier.
SvrDual svr_dual(const Rows& K, const std::vector<double>& y, double C, double epsilon, int iterations);
double svr_objective(const Rows& K, const std::vector<double>& y, double epsilon, const std::vector<double>& beta);

double sigmoid(double v);

}  // namespace oracle
