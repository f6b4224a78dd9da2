#pragma once

#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "fbsoc/errors.hpp"
#include "fbsoc/grid.hpp"
#include "fbsoc/linalg.hpp"
#include "fbsoc/policy.hpp"
#include "fbsoc/problem.hpp"
#include "fbsoc/rng.hpp"

namespace fbsoc {

namespace detail {

/// Runs fn(i) over i in [0, count) on the given number of workers. Work is
/// split by contiguous index ranges and all outputs must go to disjoint
/// per-index slots, so results never depend on the worker count.
template <class Fn>
void parallel_paths(std::size_t count, unsigned workers, Fn&& fn) {
  if (workers <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const unsigned w = std::min<unsigned>(workers, 64);
  std::vector<std::thread> pool;
  pool.reserve(w);
  const std::size_t chunk = (count + w - 1) / w;
  for (unsigned t = 0; t < w; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Brownian increments for M paths on a grid, N(0, dt) per cell under the
/// reference measure. Each cell is a pure function of (seed, path, step,
/// channel), so regeneration is bit-identical for any worker count.
struct NoiseEnsemble {
  TimeGrid grid;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  std::vector<double> dW;  // [i * N + j]
  std::vector<double> dY;

  double dW_at(std::size_t i, std::size_t j) const { return dW[i * grid.N + j]; }
  double dY_at(std::size_t i, std::size_t j) const { return dY[i * grid.N + j]; }
};

inline NoiseEnsemble sample_noise(const TimeGrid& grid, std::size_t paths,
                                  std::uint64_t seed, unsigned workers = 1) {
  if (paths < 1) throw Error("sample_noise: need at least one path");
  NoiseEnsemble ens{grid, paths, seed, {}, {}};
  const std::size_t N = grid.N;
  ens.dW.resize(paths * N);
  ens.dY.resize(paths * N);
  const double sqdt = std::sqrt(grid.dt);
  detail::parallel_paths(paths, workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < N; ++j) {
      ens.dW[i * N + j] = sqdt * rng::normal(seed, i, j, 0);
      ens.dY[i * N + j] = sqdt * rng::normal(seed, i, j, 1);
    }
  });
  return ens;
}

/// Simulated paths under the reference measure: state x, cumulative
/// observation Y, log density log rho, applied controls u and the h values
/// along them. x, Y, logrho live on nodes 0..N; u and h on intervals
/// 0..N-1 (left-endpoint convention).
struct PathEnsemble {
  TimeGrid grid;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  std::size_t n = 1;
  std::size_t k = 1;
  std::vector<double> x;       // [(i*(N+1)+j)*n + c]
  std::vector<double> Y;       // [i*(N+1)+j]
  std::vector<double> logrho;  // [i*(N+1)+j]
  std::vector<double> u;       // [(i*N+j)*k + c]
  std::vector<double> h_val;   // [i*N + j]

  Span x_at(std::size_t i, std::size_t j) const {
    return Span(x).subspan((i * (grid.N + 1) + j) * n, n);
  }
  MutSpan x_at(std::size_t i, std::size_t j) {
    return MutSpan(x).subspan((i * (grid.N + 1) + j) * n, n);
  }
  double Y_at(std::size_t i, std::size_t j) const {
    return Y[i * (grid.N + 1) + j];
  }
  double logrho_at(std::size_t i, std::size_t j) const {
    return logrho[i * (grid.N + 1) + j];
  }
  double rho_at(std::size_t i, std::size_t j) const {
    return std::exp(logrho_at(i, j));
  }
  Span u_at(std::size_t i, std::size_t j) const {
    return Span(u).subspan((i * grid.N + j) * k, k);
  }
  double h_at(std::size_t i, std::size_t j) const {
    return h_val[i * grid.N + j];
  }
  /// Observation prefix Y_0..Y_j for path i (contiguous row).
  Span y_prefix(std::size_t i, std::size_t j) const {
    return Span(Y).subspan(i * (grid.N + 1), j + 1);
  }
  /// Reconstructed innovation increment dW^u = dY - h dt.
  double innovation(const NoiseEnsemble& noise, std::size_t i,
                    std::size_t j) const {
    return noise.dY_at(i, j) - h_at(i, j) * grid.dt;
  }
};

/// Euler-Maruyama for the transformed system under the reference measure:
///   x_{j+1}      = x_j + (b - sigma2 h) dt + sigma1 dW + sigma2 dY
///   logrho_{j+1} = logrho_j + h dY - h^2 dt / 2
/// The control is the policy value at the left endpoint, projected onto U.
inline PathEnsemble simulate_forward(const ProblemInstance& prob,
                                     const Policy& policy,
                                     const NoiseEnsemble& noise,
                                     unsigned workers = 1) {
  if (policy.control_dim() != prob.dims.k)
    throw DimensionMismatch("simulate_forward: policy control dim != k");
  const TimeGrid& grid = noise.grid;
  const std::size_t N = grid.N, M = noise.paths;
  const std::size_t n = prob.dims.n, k = prob.dims.k;
  const double dt = grid.dt;

  PathEnsemble ens;
  ens.grid = grid;
  ens.paths = M;
  ens.seed = noise.seed;
  ens.n = n;
  ens.k = k;
  ens.x.resize(M * (N + 1) * n);
  ens.Y.resize(M * (N + 1));
  ens.logrho.resize(M * (N + 1));
  ens.u.resize(M * N * k);
  ens.h_val.resize(M * N);

  const auto& c = prob.coeffs;
  // (path, step) of the first non-finite cell, recorded per path and
  // rethrown in path order after the join so failures are deterministic.
  std::vector<std::size_t> bad_step(M, SIZE_MAX);

  detail::parallel_paths(M, workers, [&](std::size_t i) {
    MutSpan x0 = ens.x_at(i, 0);
    for (std::size_t q = 0; q < n; ++q) x0[q] = c.x0[q];
    ens.Y[i * (N + 1)] = 0.0;
    ens.logrho[i * (N + 1)] = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      const double t = grid.node(j);
      const Span xj = ens.x_at(i, j);
      std::vector<double> uj =
          policy.evaluate(grid, j, ens.y_prefix(i, j));
      prob.control_set.project_in_place(uj);
      for (std::size_t q = 0; q < k; ++q) ens.u[(i * N + j) * k + q] = uj[q];

      const std::vector<double> bj = c.b(t, xj, uj);
      const std::vector<double> s1 = c.sigma1(t, xj, uj);
      const std::vector<double> s2 = c.sigma2(t, xj, uj);
      const double hj = c.h(t, xj, uj);
      ens.h_val[i * N + j] = hj;

      const double dWj = noise.dW_at(i, j);
      const double dYj = noise.dY_at(i, j);
      MutSpan xn = ens.x_at(i, j + 1);
      for (std::size_t q = 0; q < n; ++q)
        xn[q] = xj[q] + (bj[q] - s2[q] * hj) * dt + s1[q] * dWj + s2[q] * dYj;
      ens.Y[i * (N + 1) + j + 1] = ens.Y[i * (N + 1) + j] + dYj;
      ens.logrho[i * (N + 1) + j + 1] =
          ens.logrho[i * (N + 1) + j] + hj * dYj - 0.5 * hj * hj * dt;

      if (!all_finite(xn) || !std::isfinite(ens.logrho[i * (N + 1) + j + 1])) {
        bad_step[i] = j + 1;
        return;
      }
    }
  });
  for (std::size_t i = 0; i < M; ++i)
    if (bad_step[i] != SIZE_MAX)
      throw NonFinite("simulate_forward: state became non-finite", i,
                      bad_step[i]);
  return ens;
}

struct MartingaleCheckRow {
  std::size_t step;
  double mean;
  double se;  // NaN when undefined (single path)
  double z;   // z-score of mean - 1
};

/// Monte Carlo check that E[rho(t)] = 1 at the requested grid nodes.
/// Failures are numbers, not exceptions.
inline std::vector<MartingaleCheckRow> density_martingale_check(
    const PathEnsemble& ens, const std::vector<std::size_t>& steps) {
  std::vector<MartingaleCheckRow> rows;
  std::vector<double> vals(ens.paths);
  for (std::size_t j : steps) {
    for (std::size_t i = 0; i < ens.paths; ++i) vals[i] = ens.rho_at(i, j);
    const MeanSe ms = mean_se(vals);
    double z;
    if (std::isnan(ms.se))
      z = std::numeric_limits<double>::quiet_NaN();
    else if (ms.se == 0.0)
      z = (ms.mean == 1.0) ? 0.0 : std::numeric_limits<double>::infinity();
    else
      z = (ms.mean - 1.0) / ms.se;
    rows.push_back({j, ms.mean, ms.se, z});
  }
  return rows;
}

struct MomentDiagnostics {
  MeanSe sup_x4;      // E[sup_t |x|^4]
  MeanSe sup_rho2;    // E[sup_t rho^2]
  MeanSe sup_rho4;    // E[sup_t rho^4]
  MeanSe u_l4;        // E[(int |u|^2 dt)^2], the admissibility statistic
};

inline MomentDiagnostics moment_diagnostics(const PathEnsemble& ens) {
  const std::size_t M = ens.paths, N = ens.grid.N;
  std::vector<double> sx(M), r2(M), r4(M), ul(M);
  for (std::size_t i = 0; i < M; ++i) {
    double max_x = 0.0, max_lr = 0.0;
    for (std::size_t j = 0; j <= N; ++j) {
      max_x = std::max(max_x, norm2(ens.x_at(i, j)));
      max_lr = std::max(max_lr, ens.logrho_at(i, j));
    }
    sx[i] = max_x * max_x * max_x * max_x;
    r2[i] = std::exp(2.0 * max_lr);
    r4[i] = std::exp(4.0 * max_lr);
    double q = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      const Span uj = ens.u_at(i, j);
      q += dot(uj, uj) * ens.grid.dt;
    }
    ul[i] = q * q;
  }
  return {mean_se(sx), mean_se(r2), mean_se(r4), mean_se(ul)};
}

}  // namespace fbsoc
