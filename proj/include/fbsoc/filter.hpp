#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "fbsoc/bsde.hpp"
#include "fbsoc/errors.hpp"
#include "fbsoc/features.hpp"
#include "fbsoc/regression.hpp"
#include "fbsoc/simulate.hpp"

namespace fbsoc {

inline constexpr double kBayesDenominatorFloor = 1e-12;

/// Conditional expectations on the observation filtration at one step,
/// realized by in-sample regression on lagged-Y polynomial features. At a
/// fixed step the t-powers of the feature map are collinear with the
/// constant, so the design uses the t-free monomials (same span there).
class ObservationRegression {
 public:
  ObservationRegression(const PathEnsemble& ens,
                        const ObservationFeatureMap& fmap, std::size_t j,
                        double ridge)
      : ens_(ens), j_(j), reg_(design(ens, fmap, j), ridge) {
    std::vector<double> rho(ens.paths);
    for (std::size_t i = 0; i < ens.paths; ++i) rho[i] = ens.rho_at(i, j);
    rho_ = std::move(rho);
    fitted_rho_ = reg_.fitted(rho_);
  }

  /// E[value | F^Y_{t_j}] per path.
  std::vector<double> cond_expect(Span values) const {
    return reg_.fitted(values);
  }

  /// E^u[value | F^Y_{t_j}] per path via the Bayes (Kallianpur-Striebel)
  /// ratio E[rho v | F^Y] / E[rho | F^Y]. The denominator is floored at
  /// 1e-12; flooring on more than 1% of paths throws DegenerateDensity.
  std::vector<double> bayes(Span values, std::size_t* floored_count = nullptr) const {
    const std::size_t M = ens_.paths;
    std::vector<double> weighted(M);
    for (std::size_t i = 0; i < M; ++i) weighted[i] = rho_[i] * values[i];
    std::vector<double> num = reg_.fitted(weighted);
    std::size_t floored = 0;
    for (std::size_t i = 0; i < M; ++i) {
      double den = fitted_rho_[i];
      if (den < kBayesDenominatorFloor) {
        den = kBayesDenominatorFloor;
        ++floored;
      }
      num[i] /= den;
    }
    if (floored_count) *floored_count = floored;
    if (floored * 100 > M)
      throw DegenerateDensity(
          "bayes_cond_expect: denominator floored on more than 1% of paths");
    return num;
  }

  const std::vector<double>& fitted_density() const { return fitted_rho_; }
  double leverage(std::size_t i) const { return reg_.leverage(i); }

  static Eigen::MatrixXd design(const PathEnsemble& ens,
                                const ObservationFeatureMap& fmap,
                                std::size_t j) {
    const std::vector<std::size_t> keep = fmap.t_free_indices();
    Eigen::MatrixXd X(ens.paths, keep.size());
    std::vector<double> full(fmap.count());
    for (std::size_t i = 0; i < ens.paths; ++i) {
      fmap.eval(ens.grid, j, ens.y_prefix(i, j), full);
      for (std::size_t f = 0; f < keep.size(); ++f)
        X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) =
            full[keep[f]];
    }
    return X;
  }

 private:
  const PathEnsemble& ens_;
  std::size_t j_;
  RidgeRegression reg_;
  std::vector<double> rho_;
  std::vector<double> fitted_rho_;
};

inline std::vector<double> cond_expect_Y(Span values, const PathEnsemble& ens,
                                         const ObservationFeatureMap& fmap,
                                         std::size_t j, double ridge) {
  return ObservationRegression(ens, fmap, j, ridge).cond_expect(values);
}

inline std::vector<double> bayes_cond_expect(Span values,
                                             const PathEnsemble& ens,
                                             const ObservationFeatureMap& fmap,
                                             std::size_t j, double ridge,
                                             std::size_t* floored = nullptr) {
  return ObservationRegression(ens, fmap, j, ridge).bayes(values, floored);
}

struct CostEstimate {
  double J = 0.0;
  double se = 0.0;
};

/// Per-path totals of the density-weighted cost
///   sum_j rho_j l(t_j, .) dt + rho_N Phi(x_N) + gamma(y_0).
inline std::vector<double> cost_per_path(const ProblemInstance& prob,
                                         const PathEnsemble& ens,
                                         const BackwardEnsemble& back) {
  const std::size_t M = ens.paths, N = ens.grid.N;
  const double dt = ens.grid.dt;
  const auto& c = prob.coeffs;
  std::vector<double> total(M);
  for (std::size_t i = 0; i < M; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      const double lij =
          c.l(ens.grid.node(j), ens.x_at(i, j), back.y_at(i, j),
              back.z1_at(i, j), back.z2_at(i, j), ens.u_at(i, j));
      acc += ens.rho_at(i, j) * lij * dt;
    }
    acc += ens.rho_at(i, N) * c.Phi(ens.x_at(i, N));
    if (prob.dims.m > 0) acc += c.gamma(back.y_at(i, 0));
    total[i] = acc;
  }
  return total;
}

/// Monte Carlo estimate of the weak-formulation cost with its standard
/// error from per-path totals.
inline CostEstimate eval_cost(const ProblemInstance& prob,
                              const PathEnsemble& ens,
                              const BackwardEnsemble& back) {
  const std::vector<double> totals = cost_per_path(prob, ens, back);
  const MeanSe ms = mean_se(totals);
  return {ms.mean, std::isnan(ms.se) ? 0.0 : ms.se};
}

}  // namespace fbsoc
