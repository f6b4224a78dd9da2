#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fbsoc/bsde.hpp"
#include "fbsoc/filter.hpp"
#include "fbsoc/hamiltonian.hpp"
#include "fbsoc/policy.hpp"
#include "fbsoc/simulate.hpp"

namespace fbsoc {

/// All ensembles of one policy evaluation on shared noise.
struct Pipeline {
  NoiseEnsemble noise;
  PathEnsemble ens;
  BackwardEnsemble back;
  AdjointEnsemble adj;
  bool has_adjoint = false;
};

inline Pipeline run_pipeline(const ProblemInstance& prob, const Policy& pol,
                             const TimeGrid& grid, std::size_t paths,
                             std::uint64_t seed, const RegressionBasis& basis,
                             bool with_adjoint = true, unsigned workers = 1) {
  Pipeline pl;
  pl.noise = sample_noise(grid, paths, seed, workers);
  pl.ens = simulate_forward(prob, pol, pl.noise, workers);
  pl.back = prob.dims.m > 0 ? solve_backward(prob, pl.ens, pl.noise, basis)
                            : BackwardEnsemble::empty(pl.ens);
  if (with_adjoint) {
    pl.adj = solve_adjoint(prob, pl.ens, pl.noise, pl.back, basis);
    pl.has_adjoint = true;
  }
  return pl;
}

/// Re-runs forward + backward on existing noise (cost evaluations during
/// line search and finite differencing; common random numbers).
inline CostEstimate cost_at(const ProblemInstance& prob, const Policy& pol,
                            const NoiseEnsemble& noise,
                            const RegressionBasis& basis,
                            unsigned workers = 1) {
  const PathEnsemble ens = simulate_forward(prob, pol, noise, workers);
  const BackwardEnsemble back =
      prob.dims.m > 0 ? solve_backward(prob, ens, noise, basis)
                      : BackwardEnsemble::empty(ens);
  return eval_cost(prob, ens, back);
}

/// H_u at the shifted point for every (path, interval): the integrand of
/// the variational formula. Raw values under the reference measure; the
/// controlled-measure weighting is applied by callers through rho.
inline std::vector<double> functional_gradient(const ProblemInstance& prob,
                                               const PathEnsemble& ens,
                                               const BackwardEnsemble& back,
                                               const AdjointEnsemble& adj) {
  const std::size_t M = ens.paths, N = ens.grid.N, k = prob.dims.k;
  std::vector<double> g(M * N * k);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      HamiltonianPoint pt;
      pt.t = ens.grid.node(j);
      pt.x = ens.x_at(i, j);
      pt.y = back.y_at(i, j);
      pt.z1 = back.z1_at(i, j);
      pt.z2 = back.z2_at(i, j);
      pt.u = ens.u_at(i, j);
      pt.p = adj.p_at(i, j);
      pt.q1 = adj.q1_at(i, j);
      pt.q2 = adj.q2_at(i, j);
      pt.k = adj.k_at(i, j);
      const std::vector<double> s2 = prob.coeffs.sigma2(pt.t, pt.x, pt.u);
      pt.R2eff = shifted_R2(adj.R2_at(i, j), s2, pt.p, pt.z2, pt.k);
      const std::vector<double> Hu = grad_H(pt, prob.coeffs, Wrt::u);
      for (std::size_t c = 0; c < k; ++c) g[(i * N + j) * k + c] = Hu[c];
    }
  }
  return g;
}

struct GradEstimate {
  std::vector<double> grad;  // d J / d theta
  std::vector<double> se;    // per-coordinate standard error
  double norm = 0.0;
};

/// Parameter gradient of the cost: the variational integrand composed with
/// the policy Jacobian, density-weighted under the reference measure:
///   (1/M) sum_i sum_j rho_ij (du/dtheta)^T H_u dt.
inline GradEstimate parameter_gradient(const ProblemInstance& prob,
                                       const LinearFeaturePolicy& pol,
                                       const PathEnsemble& ens,
                                       const BackwardEnsemble& back,
                                       const AdjointEnsemble& adj) {
  const std::size_t M = ens.paths, N = ens.grid.N, k = prob.dims.k;
  const std::size_t P = pol.param_count();
  const double dt = ens.grid.dt;
  const std::vector<double> g = functional_gradient(prob, ens, back, adj);

  std::vector<double> per_path(M * P, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    MutSpan acc(per_path.data() + i * P, P);
    for (std::size_t j = 0; j < N; ++j) {
      const std::vector<double> J = pol.jacobian(ens.grid, j, ens.y_prefix(i, j));
      const double w = ens.rho_at(i, j) * dt;
      const Span gij(g.data() + (i * N + j) * k, k);
      for (std::size_t c = 0; c < k; ++c) {
        const double wc = w * gij[c];
        if (wc == 0.0) continue;
        const Span Jrow(J.data() + c * P, P);
        axpy(wc, Jrow, acc);
      }
    }
  }
  GradEstimate est;
  est.grad.resize(P);
  est.se.resize(P);
  std::vector<double> col(M);
  for (std::size_t q = 0; q < P; ++q) {
    for (std::size_t i = 0; i < M; ++i) col[i] = per_path[i * P + q];
    const MeanSe ms = mean_se(col);
    est.grad[q] = ms.mean;
    est.se[q] = std::isnan(ms.se) ? 0.0 : ms.se;
  }
  est.norm = norm2(est.grad);
  return est;
}

struct ResidualProfile {
  double total = 0.0;
  std::vector<double> per_time;
};

/// Discrete projection residual of the variational inequality: with
/// m_ij = E^u[H_u | F^Y_{t_j}] estimated by the Bayes ratio,
///   residual_j = (1/M) sum_i |u_ij - proj_U(u_ij - m_ij)|^2,
/// integrated over time. Zero iff the discrete optimality condition holds
/// path-wise.
inline ResidualProfile necessary_condition_residual(
    const ProblemInstance& prob, const PathEnsemble& ens,
    const BackwardEnsemble& back, const AdjointEnsemble& adj,
    const ObservationFeatureMap& fmap, double ridge) {
  const std::size_t M = ens.paths, N = ens.grid.N, k = prob.dims.k;
  const std::vector<double> g = functional_gradient(prob, ens, back, adj);
  ResidualProfile prof;
  prof.per_time.resize(N);
  std::vector<double> comp(M);
  std::vector<double> mhat(M * k);
  for (std::size_t j = 0; j < N; ++j) {
    ObservationRegression reg(ens, fmap, j, ridge);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t i = 0; i < M; ++i) comp[i] = g[(i * N + j) * k + c];
      const std::vector<double> b = reg.bayes(comp);
      for (std::size_t i = 0; i < M; ++i) mhat[i * k + c] = b[i];
    }
    double acc = 0.0;
    std::vector<double> v(k);
    for (std::size_t i = 0; i < M; ++i) {
      const Span uij = ens.u_at(i, j);
      for (std::size_t c = 0; c < k; ++c) v[c] = uij[c] - mhat[i * k + c];
      prob.control_set.project_in_place(v);
      double d2 = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = uij[c] - v[c];
        d2 += d * d;
      }
      acc += d2;
    }
    prof.per_time[j] = acc / static_cast<double>(M);
    prof.total += prof.per_time[j] * ens.grid.dt;
  }
  return prof;
}

struct GradientReport {
  std::size_t iter = 0;
  double J = 0.0;
  double J_se = 0.0;
  double grad_norm = 0.0;
  double residual = 0.0;
  double step = 0.0;
  std::uint64_t seed = 0;
};

struct OptimizeOptions {
  std::size_t max_iters = 50;
  double tol = 1e-3;
  double step0 = 0.5;
  std::size_t max_halvings = 20;
  RegressionBasis basis{};
  double cond_ridge = -1.0;  // ridge for the residual's Y-regressions
  bool track_residual = true;
  unsigned workers = 1;
};

struct OptimizeResult {
  LinearFeaturePolicy policy;
  std::vector<GradientReport> reports;
  bool line_search_stalled = false;
  bool converged = false;
};

/// Projected-gradient descent on the policy parameters with Armijo
/// backtracking. The same noise ensemble is reused for every evaluation
/// (sample-average approximation), so line-search comparisons are under
/// common random numbers and reported J is non-increasing.
inline OptimizeResult optimize_policy(const ProblemInstance& prob,
                                      const LinearFeaturePolicy& pol0,
                                      const TimeGrid& grid, std::size_t paths,
                                      std::uint64_t seed,
                                      const OptimizeOptions& opt = {}) {
  OptimizeResult res{pol0, {}, false, false};
  LinearFeaturePolicy pol = pol0;
  const NoiseEnsemble noise = sample_noise(grid, paths, seed, opt.workers);
  double step = opt.step0;

  for (std::size_t iter = 0; iter < opt.max_iters; ++iter) {
    const PathEnsemble ens = simulate_forward(prob, pol, noise, opt.workers);
    const BackwardEnsemble back =
        prob.dims.m > 0 ? solve_backward(prob, ens, noise, opt.basis)
                        : BackwardEnsemble::empty(ens);
    const AdjointEnsemble adj =
        solve_adjoint(prob, ens, noise, back, opt.basis);
    const CostEstimate cost = eval_cost(prob, ens, back);
    const GradEstimate grad = parameter_gradient(prob, pol, ens, back, adj);
    double residual = 0.0;
    if (opt.track_residual) {
      const auto fmap = pol.feature_map();
      residual = necessary_condition_residual(prob, ens, back, adj, fmap,
                                              opt.cond_ridge)
                     .total;
    }
    res.reports.push_back(
        {iter, cost.J, cost.se, grad.norm, residual, step, seed});
    res.policy = pol;

    if (grad.norm <= opt.tol * (1.0 + std::fabs(cost.J))) {
      res.converged = true;
      break;
    }

    // Armijo backtracking under common random numbers.
    bool accepted = false;
    for (std::size_t halving = 0; halving <= opt.max_halvings; ++halving) {
      LinearFeaturePolicy trial = pol;
      for (std::size_t q = 0; q < trial.theta().size(); ++q)
        trial.theta()[q] -= step * grad.grad[q];
      const CostEstimate trial_cost =
          cost_at(prob, trial, noise, opt.basis, opt.workers);
      if (trial_cost.J <= cost.J - 1e-4 * step * grad.norm * grad.norm) {
        pol = trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.line_search_stalled = true;
      break;
    }
    step = std::min(step * 2.0, 64.0 * opt.step0);
  }
  return res;
}

}  // namespace fbsoc
