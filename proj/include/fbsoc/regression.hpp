#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "fbsoc/errors.hpp"
#include "fbsoc/linalg.hpp"
#include "fbsoc/simulate.hpp"

namespace fbsoc {

/// Least squares with ridge regularization on a fixed design matrix.
/// One factorization per (step, basis); fitted() is then cheap for any
/// number of target vectors sharing the design.
class RidgeRegression {
 public:
  /// ridge < 0 selects the scale-invariant default
  /// 1e-8 * trace(X^T X) / F; ridge = 0 requests plain least squares and
  /// throws SingularRegression if the normal system is numerically
  /// singular.
  RidgeRegression(Eigen::MatrixXd X, double ridge) : X_(std::move(X)) {
    const auto F = X_.cols();
    if (X_.rows() <= F)
      throw SingularRegression("regression: need more paths than features");
    // Scale columns to unit RMS. At lambda = 0 the fitted values are
    // unchanged and the normal equations are far better conditioned; the
    // ridge convention applies in the scaled space. coefficients() maps
    // back to the caller's feature scale.
    scales_.assign(static_cast<std::size_t>(F), 1.0);
    for (Eigen::Index f = 0; f < F; ++f) {
      const double rms =
          std::sqrt(X_.col(f).squaredNorm() / static_cast<double>(X_.rows()));
      if (rms > 0.0) {
        X_.col(f) /= rms;
        scales_[static_cast<std::size_t>(f)] = rms;
      }
    }
    Eigen::MatrixXd G = X_.transpose() * X_;
    if (ridge < 0.0) ridge = 1e-8 * G.trace() / static_cast<double>(F);
    lambda_ = ridge;
    G.diagonal().array() += ridge;
    ldlt_.compute(G);
    const Eigen::VectorXd D = ldlt_.vectorD();
    const double dmax = D.cwiseAbs().maxCoeff();
    if (ldlt_.info() != Eigen::Success || !(dmax > 0.0) ||
        D.minCoeff() <= 1e-13 * dmax) {
      if (ridge == 0.0)
        throw SingularRegression(
            "regression: normal equations numerically singular at lambda=0");
    }
  }

  Eigen::Index rows() const { return X_.rows(); }
  Eigen::Index cols() const { return X_.cols(); }
  double lambda() const { return lambda_; }

  /// Coefficients on the caller's (unscaled) features.
  Eigen::VectorXd coefficients(const Eigen::VectorXd& targets) const {
    Eigen::VectorXd beta = ldlt_.solve(X_.transpose() * targets);
    for (Eigen::Index f = 0; f < beta.size(); ++f)
      beta[f] /= scales_[static_cast<std::size_t>(f)];
    return beta;
  }

  Eigen::VectorXd fitted(const Eigen::VectorXd& targets) const {
    return X_ * ldlt_.solve(X_.transpose() * targets);
  }

  std::vector<double> fitted(Span targets) const {
    Eigen::VectorXd t(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) t[i] = targets[i];
    const Eigen::VectorXd f = fitted(t);
    return std::vector<double>(f.data(), f.data() + f.size());
  }

  /// Hat-matrix diagonal entry x_i^T (X^T X + lambda I)^{-1} x_i.
  double leverage(std::size_t i) const {
    const Eigen::VectorXd xi = X_.row(static_cast<Eigen::Index>(i));
    return xi.dot(ldlt_.solve(xi));
  }

 private:
  Eigen::MatrixXd X_;  // column-scaled
  std::vector<double> scales_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  double lambda_ = 0.0;
};

/// Least squares of targets on row-major features (M x F); returns the
/// in-sample fitted values.
inline std::vector<double> regression_fit(Span targets, Span features,
                                          std::size_t feature_count,
                                          double ridge) {
  const std::size_t M = targets.size();
  if (feature_count == 0 || features.size() != M * feature_count)
    throw DimensionMismatch("regression_fit: feature layout mismatch");
  Eigen::MatrixXd X(M, feature_count);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t f = 0; f < feature_count; ++f)
      X(i, f) = features[i * feature_count + f];
  RidgeRegression reg(std::move(X), ridge);
  return reg.fitted(targets);
}

/// Polynomial regression basis for conditional expectations along a path
/// ensemble: monomials up to the given degree in (x components, Y,
/// logrho), constant included.
struct RegressionBasis {
  RegressionBasis() = default;
  explicit RegressionBasis(int degree, double ridge = -1.0)
      : degree(degree), ridge(ridge) {}

  int degree = 2;
  double ridge = -1.0;  // negative = scale-invariant default

  std::size_t feature_count(std::size_t n) const {
    return table(n).size() / (n + 2);
  }

  /// Design matrix over all paths at node j.
  Eigen::MatrixXd design(const PathEnsemble& ens, std::size_t j) const {
    const std::size_t n = ens.n;
    const auto& exps = table(n);
    const std::size_t vars = n + 2;
    const std::size_t F = exps.size() / vars;
    Eigen::MatrixXd X(ens.paths, F);
    std::vector<double> v(vars);
    for (std::size_t i = 0; i < ens.paths; ++i) {
      const Span xi = ens.x_at(i, j);
      for (std::size_t q = 0; q < n; ++q) v[q] = xi[q];
      v[n] = ens.Y_at(i, j);
      v[n + 1] = ens.logrho_at(i, j);
      for (std::size_t f = 0; f < F; ++f) {
        double prod = 1.0;
        for (std::size_t q = 0; q < vars; ++q)
          for (int r = 0; r < exps[f * vars + q]; ++r) prod *= v[q];
        X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = prod;
      }
    }
    return X;
  }

 private:
  const std::vector<int>& table(std::size_t n) const {
    if (cached_n_ != n + 1 || cached_degree_ != degree) {
      exps_.clear();
      std::vector<int> e(n + 2, 0);
      enumerate(e, 0, degree);
      cached_n_ = n + 1;
      cached_degree_ = degree;
    }
    return exps_;
  }
  void enumerate(std::vector<int>& e, std::size_t var, int budget) const {
    if (var == e.size()) {
      exps_.insert(exps_.end(), e.begin(), e.end());
      return;
    }
    for (int d = 0; d <= budget; ++d) {
      e[var] = d;
      enumerate(e, var + 1, budget - d);
    }
    e[var] = 0;
  }

  mutable std::vector<int> exps_;
  mutable std::size_t cached_n_ = 0;
  mutable int cached_degree_ = -1;
};

}  // namespace fbsoc
