#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "fbsoc/errors.hpp"
#include "fbsoc/hamiltonian.hpp"
#include "fbsoc/regression.hpp"
#include "fbsoc/simulate.hpp"

namespace fbsoc {

/// Backward triple (y, z1, z2) along a simulated ensemble. y lives on
/// nodes 0..N, z1/z2 on intervals 0..N-1. Empty arrays when m = 0.
struct BackwardEnsemble {
  std::size_t m = 0;
  std::size_t paths = 0;
  std::size_t N = 0;
  std::vector<double> y;       // [(i*(N+1)+j)*m + c]
  std::vector<double> z1, z2;  // [(i*N+j)*m + c]

  static BackwardEnsemble empty(const PathEnsemble& ens) {
    return BackwardEnsemble{0, ens.paths, ens.grid.N, {}, {}, {}};
  }

  Span y_at(std::size_t i, std::size_t j) const {
    return Span(y).subspan((i * (N + 1) + j) * m, m);
  }
  Span z1_at(std::size_t i, std::size_t j) const {
    return Span(z1).subspan((i * N + j) * m, m);
  }
  Span z2_at(std::size_t i, std::size_t j) const {
    return Span(z2).subspan((i * N + j) * m, m);
  }
};

/// Adjoint 7-tuple (p, q1, q2, k, r, R1, R2) along an ensemble. p, k, r on
/// nodes; q1, q2, R1, R2 on intervals.
struct AdjointEnsemble {
  std::size_t n = 1;
  std::size_t m = 0;
  std::size_t paths = 0;
  std::size_t N = 0;
  std::vector<double> p;        // [(i*(N+1)+j)*n + c]
  std::vector<double> q1, q2;   // [(i*N+j)*n + c]
  std::vector<double> k;        // [(i*(N+1)+j)*m + c]
  std::vector<double> r;        // [i*(N+1)+j]
  std::vector<double> R1, R2;   // [i*N+j]

  Span p_at(std::size_t i, std::size_t j) const {
    return Span(p).subspan((i * (N + 1) + j) * n, n);
  }
  Span q1_at(std::size_t i, std::size_t j) const {
    return Span(q1).subspan((i * N + j) * n, n);
  }
  Span q2_at(std::size_t i, std::size_t j) const {
    return Span(q2).subspan((i * N + j) * n, n);
  }
  Span k_at(std::size_t i, std::size_t j) const {
    return Span(k).subspan((i * (N + 1) + j) * m, m);
  }
  double r_at(std::size_t i, std::size_t j) const { return r[i * (N + 1) + j]; }
  double R1_at(std::size_t i, std::size_t j) const { return R1[i * N + j]; }
  double R2_at(std::size_t i, std::size_t j) const { return R2[i * N + j]; }
};

namespace detail {

/// z-extraction by increment regression: z ~ E[target * dI | features]/dt.
inline Eigen::VectorXd to_eigen(Span v) {
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

}  // namespace detail

/// Solves the backward component under the reference measure by regression
/// Monte Carlo, stepping j = N-1 .. 0:
///   z1_j = E[y_{j+1} dW_j | features_j] / dt     (dY for z2)
///   y_j  = E[y_{j+1} | features_j] - (f - z2 h)(t_j, .) dt
/// with one Picard substitution: f sees the regressed continuation value.
inline BackwardEnsemble solve_backward(const ProblemInstance& prob,
                                       const PathEnsemble& ens,
                                       const NoiseEnsemble& noise,
                                       const RegressionBasis& basis) {
  const std::size_t m = prob.dims.m;
  if (m < 1) throw Error("solve_backward: m must be >= 1 (use empty())");
  const std::size_t M = ens.paths, N = ens.grid.N;
  const double dt = ens.grid.dt;
  const auto& c = prob.coeffs;

  BackwardEnsemble back;
  back.m = m;
  back.paths = M;
  back.N = N;
  back.y.resize(M * (N + 1) * m);
  back.z1.resize(M * N * m);
  back.z2.resize(M * N * m);

  for (std::size_t i = 0; i < M; ++i) {
    const std::vector<double> yT = c.phi(ens.x_at(i, N));
    for (std::size_t q = 0; q < m; ++q) back.y[(i * (N + 1) + N) * m + q] = yT[q];
  }

  Eigen::VectorXd target(M), tW(M), tY(M);
  for (std::size_t j = N; j-- > 0;) {
    RidgeRegression reg(basis.design(ens, j), basis.ridge);
    std::vector<double> cont(M * m);
    for (std::size_t q = 0; q < m; ++q) {
      for (std::size_t i = 0; i < M; ++i) {
        const double ynext = back.y[(i * (N + 1) + j + 1) * m + q];
        target[i] = ynext;
        tW[i] = ynext * noise.dW_at(i, j);
        tY[i] = ynext * noise.dY_at(i, j);
      }
      const Eigen::VectorXd fc = reg.fitted(target);
      const Eigen::VectorXd f1 = reg.fitted(tW);
      const Eigen::VectorXd f2 = reg.fitted(tY);
      for (std::size_t i = 0; i < M; ++i) {
        cont[i * m + q] = fc[i];
        back.z1[(i * N + j) * m + q] = f1[i] / dt;
        back.z2[(i * N + j) * m + q] = f2[i] / dt;
      }
    }
    const double t = ens.grid.node(j);
    for (std::size_t i = 0; i < M; ++i) {
      const Span ytil(cont.data() + i * m, m);
      const Span z1i = back.z1_at(i, j);
      const Span z2i = back.z2_at(i, j);
      const std::vector<double> fv =
          c.f(t, ens.x_at(i, j), ytil, z1i, z2i, ens.u_at(i, j));
      const double hij = ens.h_at(i, j);
      for (std::size_t q = 0; q < m; ++q) {
        const double yj = ytil[q] - (fv[q] - z2i[q] * hij) * dt;
        if (!std::isfinite(yj))
          throw NonFinite("solve_backward: y became non-finite", i, j);
        back.y[(i * (N + 1) + j) * m + q] = yj;
      }
    }
  }
  return back;
}

/// Solves the adjoint system along the ensemble in three stages, all under
/// the reference measure:
///  (1) k forward:  k_{j+1} = k_j - H_y dt - H_z1 dW - H_z2 (dY - h dt),
///      k_0 = -gamma_y(y_0). H_y, H_z1, H_z2 depend only on k.
///  (2) r backward: r_N = Phi(x_N); R1, R2 by increment regression;
///      r_j = E[r_{j+1}|.] + (l + R2 h) dt.
///  (3) p backward: p_N = Phi_x(x_N) - phi_x^T(x_N) k_N; q1, q2 by
///      increment regression; p_j = E[p_{j+1}|.] + (H_x + q2 h) dt, where
///      H_x uses the shifted scalar R2eff = R2 - <sigma2, p> - <z2, k> and
///      p inside H_x is the regressed continuation value. The q2 h term is
///      the dW^u -> dY drift correction of the p-equation under the
///      reference measure (same correction the r-equation carries as R2 h).
inline AdjointEnsemble solve_adjoint(const ProblemInstance& prob,
                                     const PathEnsemble& ens,
                                     const NoiseEnsemble& noise,
                                     const BackwardEnsemble& back,
                                     const RegressionBasis& basis) {
  const std::size_t n = prob.dims.n, m = prob.dims.m;
  const std::size_t M = ens.paths, N = ens.grid.N;
  const double dt = ens.grid.dt;
  const auto& c = prob.coeffs;

  AdjointEnsemble adj;
  adj.n = n;
  adj.m = m;
  adj.paths = M;
  adj.N = N;
  adj.p.resize(M * (N + 1) * n);
  adj.q1.resize(M * N * n);
  adj.q2.resize(M * N * n);
  adj.k.resize(M * (N + 1) * m);
  adj.r.resize(M * (N + 1));
  adj.R1.resize(M * N);
  adj.R2.resize(M * N);

  // Stage 1: k forward along each path (no regression; pathwise recursion).
  if (m > 0) {
    for (std::size_t i = 0; i < M; ++i) {
      const std::vector<double> k0 = c.gamma_y(back.y_at(i, 0));
      for (std::size_t q = 0; q < m; ++q) adj.k[(i * (N + 1)) * m + q] = -k0[q];
      for (std::size_t j = 0; j < N; ++j) {
        HamiltonianPoint pt;
        pt.t = ens.grid.node(j);
        pt.x = ens.x_at(i, j);
        pt.y = back.y_at(i, j);
        pt.z1 = back.z1_at(i, j);
        pt.z2 = back.z2_at(i, j);
        pt.u = ens.u_at(i, j);
        pt.k = adj.k_at(i, j);
        const std::vector<double> Hy = grad_H(pt, c, Wrt::y);
        const std::vector<double> Hz1 = grad_H(pt, c, Wrt::z1);
        const std::vector<double> Hz2 = grad_H(pt, c, Wrt::z2);
        const double dWj = noise.dW_at(i, j);
        const double dWu = ens.innovation(noise, i, j);
        for (std::size_t q = 0; q < m; ++q) {
          const double kn = adj.k[(i * (N + 1) + j) * m + q] - Hy[q] * dt -
                            Hz1[q] * dWj - Hz2[q] * dWu;
          if (!std::isfinite(kn))
            throw NonFinite("solve_adjoint: k became non-finite", i, j + 1);
          adj.k[(i * (N + 1) + j + 1) * m + q] = kn;
        }
      }
    }
  }

  // Terminal conditions for r and p.
  for (std::size_t i = 0; i < M; ++i) {
    const Span xT = ens.x_at(i, N);
    adj.r[i * (N + 1) + N] = c.Phi(xT);
    std::vector<double> pT = c.Phi_x(xT);
    if (m > 0) {
      const std::vector<double> phix = c.phi_x(xT);  // m x n
      const Span kT = adj.k_at(i, N);
      for (std::size_t q = 0; q < n; ++q) {
        double s = 0.0;
        for (std::size_t rix = 0; rix < m; ++rix)
          s += phix[rix * n + q] * kT[rix];
        pT[q] -= s;
      }
    }
    for (std::size_t q = 0; q < n; ++q) adj.p[(i * (N + 1) + N) * n + q] = pT[q];
  }

  // Stages 2 and 3 share the per-step factorization.
  Eigen::VectorXd target(M), tW(M), tY(M);
  std::vector<double> cont_p(M * n);
  for (std::size_t j = N; j-- > 0;) {
    RidgeRegression reg(basis.design(ens, j), basis.ridge);
    const double t = ens.grid.node(j);

    // r and its martingale integrands.
    for (std::size_t i = 0; i < M; ++i) {
      const double rnext = adj.r[i * (N + 1) + j + 1];
      target[i] = rnext;
      tW[i] = rnext * noise.dW_at(i, j);
      tY[i] = rnext * noise.dY_at(i, j);
    }
    const Eigen::VectorXd rc = reg.fitted(target);
    const Eigen::VectorXd r1 = reg.fitted(tW);
    const Eigen::VectorXd r2 = reg.fitted(tY);
    for (std::size_t i = 0; i < M; ++i) {
      adj.R1[i * N + j] = r1[i] / dt;
      adj.R2[i * N + j] = r2[i] / dt;
      const double lij = c.l(t, ens.x_at(i, j), back.y_at(i, j),
                             back.z1_at(i, j), back.z2_at(i, j), ens.u_at(i, j));
      const double rj = rc[i] + (lij + adj.R2[i * N + j] * ens.h_at(i, j)) * dt;
      if (!std::isfinite(rj))
        throw NonFinite("solve_adjoint: r became non-finite", i, j);
      adj.r[i * (N + 1) + j] = rj;
    }

    // p components.
    for (std::size_t q = 0; q < n; ++q) {
      for (std::size_t i = 0; i < M; ++i) {
        const double pnext = adj.p[(i * (N + 1) + j + 1) * n + q];
        target[i] = pnext;
        tW[i] = pnext * noise.dW_at(i, j);
        tY[i] = pnext * noise.dY_at(i, j);
      }
      const Eigen::VectorXd pc = reg.fitted(target);
      const Eigen::VectorXd g1 = reg.fitted(tW);
      const Eigen::VectorXd g2 = reg.fitted(tY);
      for (std::size_t i = 0; i < M; ++i) {
        cont_p[i * n + q] = pc[i];
        adj.q1[(i * N + j) * n + q] = g1[i] / dt;
        adj.q2[(i * N + j) * n + q] = g2[i] / dt;
      }
    }
    for (std::size_t i = 0; i < M; ++i) {
      HamiltonianPoint pt;
      pt.t = t;
      pt.x = ens.x_at(i, j);
      pt.y = back.y_at(i, j);
      pt.z1 = back.z1_at(i, j);
      pt.z2 = back.z2_at(i, j);
      pt.u = ens.u_at(i, j);
      pt.p = Span(cont_p.data() + i * n, n);
      pt.q1 = adj.q1_at(i, j);
      pt.q2 = adj.q2_at(i, j);
      pt.k = adj.k_at(i, j);
      const std::vector<double> s2 = c.sigma2(t, pt.x, pt.u);
      pt.R2eff = shifted_R2(adj.R2_at(i, j), s2, pt.p, pt.z2, pt.k);
      const std::vector<double> Hx = grad_H(pt, c, Wrt::x);
      const double hij = ens.h_at(i, j);
      for (std::size_t q = 0; q < n; ++q) {
        const double pj =
            cont_p[i * n + q] +
            (Hx[q] + adj.q2[(i * N + j) * n + q] * hij) * dt;
        if (!std::isfinite(pj))
          throw NonFinite("solve_adjoint: p became non-finite", i, j);
        adj.p[(i * (N + 1) + j) * n + q] = pj;
      }
    }
  }
  return adj;
}

}  // namespace fbsoc
