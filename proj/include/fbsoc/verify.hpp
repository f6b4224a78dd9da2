#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fbsoc/benchmark_lqg.hpp"
#include "fbsoc/optimize.hpp"

namespace fbsoc {

struct FdDerivativeReport {
  std::vector<double> eps;
  std::vector<double> fd;      // central difference per eps
  double richardson = 0.0;     // extrapolated from the two smallest eps
  double analytic = 0.0;       // parameter_gradient . delta
  double rel_err = 0.0;        // |richardson - analytic| / max tiny |richardson|
};

/// Central finite differences of the cost along a parameter direction under
/// common random numbers, compared against the variational-formula gradient.
inline FdDerivativeReport fd_directional_derivative(
    const ProblemInstance& prob, const LinearFeaturePolicy& pol,
    const std::vector<double>& delta, const std::vector<double>& eps_list,
    const TimeGrid& grid, std::size_t paths, std::uint64_t seed,
    const RegressionBasis& basis = {}, unsigned workers = 1) {
  if (delta.size() != pol.param_count())
    throw DimensionMismatch("fd_directional_derivative: bad direction length");
  FdDerivativeReport rep;
  rep.eps = eps_list;
  const NoiseEnsemble noise = sample_noise(grid, paths, seed, workers);

  auto cost_shift = [&](double scale) {
    LinearFeaturePolicy shifted = pol;
    for (std::size_t q = 0; q < delta.size(); ++q)
      shifted.theta()[q] += scale * delta[q];
    return cost_at(prob, shifted, noise, basis, workers).J;
  };
  for (double eps : eps_list)
    rep.fd.push_back((cost_shift(eps) - cost_shift(-eps)) / (2.0 * eps));

  // Richardson on the two smallest eps: central FD error is O(eps^2).
  if (rep.fd.size() >= 2) {
    std::size_t i1 = 0;
    for (std::size_t i = 1; i < eps_list.size(); ++i)
      if (eps_list[i] < eps_list[i1]) i1 = i;
    std::size_t i2 = i1 == 0 ? 1 : 0;
    for (std::size_t i = 0; i < eps_list.size(); ++i)
      if (i != i1 && eps_list[i] < eps_list[i2]) i2 = i;
    const double e1 = eps_list[i1], e2 = eps_list[i2];
    rep.richardson = (e2 * e2 * rep.fd[i1] - e1 * e1 * rep.fd[i2]) /
                     (e2 * e2 - e1 * e1);
  } else if (!rep.fd.empty()) {
    rep.richardson = rep.fd.front();
  }

  const PathEnsemble ens = simulate_forward(prob, pol, noise, workers);
  const BackwardEnsemble back =
      prob.dims.m > 0 ? solve_backward(prob, ens, noise, basis)
                      : BackwardEnsemble::empty(ens);
  const AdjointEnsemble adj = solve_adjoint(prob, ens, noise, back, basis);
  const GradEstimate grad = parameter_gradient(prob, pol, ens, back, adj);
  rep.analytic = dot(grad.grad, delta);
  rep.rel_err = std::fabs(rep.richardson - rep.analytic) /
                std::max(1e-12, std::fabs(rep.richardson));
  return rep;
}

struct CostDifferenceReport {
  double lhs = 0.0;  // J(u) - J(ubar)
  double rhs = 0.0;
  double se = 0.0;   // standard error of the per-path LHS - RHS
  double z = 0.0;
  std::map<std::string, double> terms;
};

/// Monte Carlo check of the cost-difference identity: both policies are
/// simulated on shared noise, adjoints are solved at ubar, and the
/// right-hand side is assembled term by term. Each named term is reported
/// so a discrepancy is attributable.
inline CostDifferenceReport cost_difference_check(const ProblemInstance& prob,
                                          const Policy& pol_u,
                                          const Policy& pol_ubar,
                                          const TimeGrid& grid,
                                          std::size_t paths,
                                          std::uint64_t seed,
                                          const RegressionBasis& basis = {},
                                          unsigned workers = 1) {
  const std::size_t M = paths, N = grid.N;
  const std::size_t m = prob.dims.m;
  const double dt = grid.dt;
  const auto& c = prob.coeffs;

  const NoiseEnsemble noise = sample_noise(grid, M, seed, workers);
  const PathEnsemble eu = simulate_forward(prob, pol_u, noise, workers);
  const PathEnsemble eb = simulate_forward(prob, pol_ubar, noise, workers);
  const BackwardEnsemble bu = m > 0 ? solve_backward(prob, eu, noise, basis)
                                    : BackwardEnsemble::empty(eu);
  const BackwardEnsemble bb = m > 0 ? solve_backward(prob, eb, noise, basis)
                                    : BackwardEnsemble::empty(eb);
  const AdjointEnsemble adj = solve_adjoint(prob, eb, noise, bb, basis);

  const std::vector<double> cost_u = cost_per_path(prob, eu, bu);
  const std::vector<double> cost_b = cost_per_path(prob, eb, bb);

  enum Term {
    kDeltaH, kLinX, kLinY, kLinZ1, kLinZ2, kCrossP, kCrossK,
    kPhiBracket, kphiBracket, kGammaBracket, kRhoR2, kRhoL, kRhoPhi, kCount
  };
  static const char* names[kCount] = {
      "delta_H", "lin_x", "lin_y", "lin_z1", "lin_z2",
      "cross_sigma2_p", "cross_z2_k", "Phi_bracket", "phi_bracket",
      "gamma_bracket", "rho_R2_h", "rho_l", "rho_Phi_terminal"};

  std::vector<double> diff(M);
  double term_sum[kCount] = {0.0};
  std::vector<double> dx(prob.dims.n), dyv(m), dz1(m), dz2(m);

  for (std::size_t i = 0; i < M; ++i) {
    double terms[kCount] = {0.0};
    for (std::size_t j = 0; j < N; ++j) {
      const double t = grid.node(j);
      const double rho_b = eb.rho_at(i, j);
      const double rho_u = eu.rho_at(i, j);

      HamiltonianPoint pb;
      pb.t = t;
      pb.x = eb.x_at(i, j);
      pb.y = bb.y_at(i, j);
      pb.z1 = bb.z1_at(i, j);
      pb.z2 = bb.z2_at(i, j);
      pb.u = eb.u_at(i, j);
      pb.p = adj.p_at(i, j);
      pb.q1 = adj.q1_at(i, j);
      pb.q2 = adj.q2_at(i, j);
      pb.k = adj.k_at(i, j);
      const std::vector<double> s2b = c.sigma2(t, pb.x, pb.u);
      pb.R2eff = shifted_R2(adj.R2_at(i, j), s2b, pb.p, pb.z2, pb.k);

      HamiltonianPoint pu = pb;  // same adjoints and shift, u-trajectory args
      pu.x = eu.x_at(i, j);
      pu.y = bu.y_at(i, j);
      pu.z1 = bu.z1_at(i, j);
      pu.z2 = bu.z2_at(i, j);
      pu.u = eu.u_at(i, j);

      terms[kDeltaH] += rho_b * (eval_H(pu, c) - eval_H(pb, c)) * dt;

      for (std::size_t q = 0; q < prob.dims.n; ++q)
        dx[q] = pu.x[q] - pb.x[q];
      const std::vector<double> Hx = grad_H(pb, c, Wrt::x);
      terms[kLinX] -= rho_b * dot(Hx, dx) * dt;
      if (m > 0) {
        for (std::size_t q = 0; q < m; ++q) {
          dyv[q] = pu.y[q] - pb.y[q];
          dz1[q] = pu.z1[q] - pb.z1[q];
          dz2[q] = pu.z2[q] - pb.z2[q];
        }
        terms[kLinY] -= rho_b * dot(grad_H(pb, c, Wrt::y), dyv) * dt;
        terms[kLinZ1] -= rho_b * dot(grad_H(pb, c, Wrt::z1), dz1) * dt;
        terms[kLinZ2] -= rho_b * dot(grad_H(pb, c, Wrt::z2), dz2) * dt;
      }

      const double hu = eu.h_at(i, j);
      const double hb = eb.h_at(i, j);
      const std::vector<double> s2u = c.sigma2(t, pu.x, pu.u);
      double cross_p = 0.0;
      for (std::size_t q = 0; q < prob.dims.n; ++q)
        cross_p += (s2u[q] - s2b[q]) * pb.p[q];
      terms[kCrossP] -= rho_b * cross_p * (hu - hb) * dt;
      if (m > 0) {
        double cross_k = 0.0;
        for (std::size_t q = 0; q < m; ++q)
          cross_k += (pu.z2[q] - pb.z2[q]) * pb.k[q];
        terms[kCrossK] -= rho_b * cross_k * (hu - hb) * dt;
      }

      // rho-difference corrections (plain expectations under P).
      terms[kRhoR2] += adj.R2_at(i, j) * (rho_u - rho_b) * (hu - hb) * dt;
      const double lu = c.l(t, pu.x, pu.y, pu.z1, pu.z2, pu.u);
      const double lb = c.l(t, pb.x, pb.y, pb.z1, pb.z2, pb.u);
      terms[kRhoL] += (lu - lb) * (rho_u - rho_b) * dt;
    }

    // Terminal and initial brackets.
    const Span xuT = eu.x_at(i, N), xbT = eb.x_at(i, N);
    const double PhiU = c.Phi(xuT), PhiB = c.Phi(xbT);
    const std::vector<double> PhixB = c.Phi_x(xbT);
    double lin_terminal = 0.0;
    for (std::size_t q = 0; q < prob.dims.n; ++q)
      lin_terminal += (xuT[q] - xbT[q]) * PhixB[q];
    const double rho_bT = eb.rho_at(i, N);
    terms[kPhiBracket] += rho_bT * (PhiU - PhiB - lin_terminal);

    if (m > 0) {
      const std::vector<double> phiU = c.phi(xuT);
      const std::vector<double> phiB = c.phi(xbT);
      const std::vector<double> phixB = c.phi_x(xbT);  // m x n
      const Span kT = adj.k_at(i, N);
      double br = 0.0;
      for (std::size_t q = 0; q < m; ++q) br += (phiU[q] - phiB[q]) * kT[q];
      double lin = 0.0;
      for (std::size_t rix = 0; rix < m; ++rix)
        for (std::size_t q = 0; q < prob.dims.n; ++q)
          lin += phixB[rix * prob.dims.n + q] * kT[rix] * (xuT[q] - xbT[q]);
      terms[kphiBracket] -= rho_bT * (br - lin);

      const Span yu0 = bu.y_at(i, 0), yb0 = bb.y_at(i, 0);
      const double gU = c.gamma(yu0), gB = c.gamma(yb0);
      const std::vector<double> gy = c.gamma_y(yb0);
      double lin0 = 0.0;
      for (std::size_t q = 0; q < m; ++q) lin0 += (yu0[q] - yb0[q]) * gy[q];
      terms[kGammaBracket] += gU - gB - lin0;
    }

    terms[kRhoPhi] += (eu.rho_at(i, N) - rho_bT) * (PhiU - PhiB);

    double rhs_i = 0.0;
    for (int q = 0; q < kCount; ++q) {
      rhs_i += terms[q];
      term_sum[q] += terms[q];
    }
    diff[i] = (cost_u[i] - cost_b[i]) - rhs_i;
  }

  CostDifferenceReport rep;
  double rhs_mean = 0.0;
  for (int q = 0; q < kCount; ++q) {
    const double mean_q = term_sum[q] / static_cast<double>(M);
    rep.terms[names[q]] = mean_q;
    rhs_mean += mean_q;
  }
  double lhs_mean = 0.0;
  for (std::size_t i = 0; i < M; ++i) lhs_mean += cost_u[i] - cost_b[i];
  lhs_mean /= static_cast<double>(M);
  rep.lhs = lhs_mean;
  rep.rhs = rhs_mean;
  const MeanSe d = mean_se(diff);
  rep.se = std::isnan(d.se) ? 0.0 : d.se;
  rep.z = rep.se > 0.0 ? d.mean / rep.se : (d.mean == 0.0 ? 0.0 : INFINITY);
  return rep;
}

struct PerturbationOrderReport {
  std::vector<double> eps;
  std::vector<double> x4, y4, rho2;  // E[sup |.|^p] per eps
  double x_slope = 0.0;
  double y_slope = 0.0;   // NaN when m = 0
  double rho_slope = 0.0;
};

/// Fits log-log slopes of the perturbation moments
/// E[sup |x^eps - xbar|^4] (expected slope 4) and E[sup |rho^eps -
/// rhobar|^2] (expected slope 2) for u^eps = ubar + eps (u - ubar).
inline PerturbationOrderReport perturbation_order_check(
    const ProblemInstance& prob, const Policy& pol_ubar, const Policy& pol_u,
    const std::vector<double>& eps_list, const TimeGrid& grid,
    std::size_t paths, std::uint64_t seed, const RegressionBasis& basis = {},
    unsigned workers = 1) {
  PerturbationOrderReport rep;
  rep.eps = eps_list;
  const std::size_t m = prob.dims.m;
  const NoiseEnsemble noise = sample_noise(grid, paths, seed, workers);
  const PathEnsemble base = simulate_forward(prob, pol_ubar, noise, workers);
  const BackwardEnsemble bback =
      m > 0 ? solve_backward(prob, base, noise, basis)
            : BackwardEnsemble::empty(base);

  for (double eps : eps_list) {
    const BlendPolicy blended(pol_ubar, pol_u, eps, prob.control_set);
    const PathEnsemble pe = simulate_forward(prob, blended, noise, workers);
    const BackwardEnsemble pb =
        m > 0 ? solve_backward(prob, pe, noise, basis)
              : BackwardEnsemble::empty(pe);
    double sx = 0.0, sy = 0.0, sr = 0.0;
    for (std::size_t i = 0; i < paths; ++i) {
      double mx = 0.0, my = 0.0, mr = 0.0;
      for (std::size_t j = 0; j <= grid.N; ++j) {
        double d2 = 0.0;
        const Span a = pe.x_at(i, j), b = base.x_at(i, j);
        for (std::size_t q = 0; q < prob.dims.n; ++q)
          d2 += (a[q] - b[q]) * (a[q] - b[q]);
        mx = std::max(mx, d2);
        if (m > 0) {
          double dy2 = 0.0;
          const Span ya = pb.y_at(i, j), yb = bback.y_at(i, j);
          for (std::size_t q = 0; q < m; ++q)
            dy2 += (ya[q] - yb[q]) * (ya[q] - yb[q]);
          my = std::max(my, dy2);
        }
        const double dr = pe.rho_at(i, j) - base.rho_at(i, j);
        mr = std::max(mr, dr * dr);
      }
      sx += mx * mx;  // (sup |dx|)^4
      sy += my * my;
      sr += mr;       // (sup |drho|)^2
    }
    rep.x4.push_back(sx / static_cast<double>(paths));
    rep.y4.push_back(sy / static_cast<double>(paths));
    rep.rho2.push_back(sr / static_cast<double>(paths));
  }

  std::vector<double> le(eps_list.size()), lx(eps_list.size()),
      ly(eps_list.size()), lr(eps_list.size());
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    le[i] = std::log(eps_list[i]);
    lx[i] = std::log(std::max(rep.x4[i], 1e-300));
    ly[i] = std::log(std::max(rep.y4[i], 1e-300));
    lr[i] = std::log(std::max(rep.rho2[i], 1e-300));
  }
  rep.x_slope = ls_slope(le, lx);
  rep.y_slope = m > 0 ? ls_slope(le, ly)
                      : std::numeric_limits<double>::quiet_NaN();
  rep.rho_slope = ls_slope(le, lr);
  return rep;
}

/// Worst relative error of grad_H against central differences of eval_H
/// over random points, all differentiation directions.
inline double hamiltonian_fd_check(const ProblemInstance& prob,
                                   std::size_t points, std::uint64_t seed,
                                   double step = 1e-6) {
  const std::size_t n = prob.dims.n, m = prob.dims.m, k = prob.dims.k;
  RngStream rs(seed);
  const auto [ulo, uhi] = prob.control_set.interior_box();
  double worst = 0.0;
  for (std::size_t s = 0; s < points; ++s) {
    double t = rs.uniform(0.0, prob.dims.T);
    std::vector<double> x(n), y(m), z1(m), z2(m), u(k), p(n), q1(n), q2(n),
        kv(m);
    for (auto* v : {&x, &p, &q1, &q2})
      for (auto& q : *v) q = rs.normal();
    for (auto* v : {&y, &z1, &z2, &kv})
      for (auto& q : *v) q = rs.normal();
    for (std::size_t c = 0; c < k; ++c) u[c] = rs.uniform(ulo[c], uhi[c]);
    const double R2eff = rs.normal();

    auto view = [&]() {
      HamiltonianPoint pt;
      pt.t = t;
      pt.x = x;
      pt.y = y;
      pt.z1 = z1;
      pt.z2 = z2;
      pt.u = u;
      pt.p = p;
      pt.q1 = q1;
      pt.q2 = q2;
      pt.k = kv;
      pt.R2eff = R2eff;
      return pt;
    };
    for (Wrt wrt : {Wrt::x, Wrt::y, Wrt::z1, Wrt::z2, Wrt::u}) {
      std::vector<double>* arg = nullptr;
      switch (wrt) {
        case Wrt::x: arg = &x; break;
        case Wrt::y: arg = &y; break;
        case Wrt::z1: arg = &z1; break;
        case Wrt::z2: arg = &z2; break;
        case Wrt::u: arg = &u; break;
      }
      if (arg->empty()) continue;
      const std::vector<double> analytic = grad_H(view(), prob.coeffs, wrt);
      for (std::size_t q = 0; q < arg->size(); ++q) {
        const double save = (*arg)[q];
        (*arg)[q] = save + step;
        const double Hp = eval_H(view(), prob.coeffs);
        (*arg)[q] = save - step;
        const double Hm = eval_H(view(), prob.coeffs);
        (*arg)[q] = save;
        const double fd = (Hp - Hm) / (2.0 * step);
        worst = std::max(worst, std::fabs(analytic[q] - fd) /
                                    std::max(1.0, std::fabs(analytic[q])));
      }
    }
  }
  return worst;
}

/// Bit-invariance of policy values, observation features, and per-step
/// conditional expectations under mutations of Y-increments strictly after
/// the conditioning step. Returns the number of violated probes.
inline std::size_t adaptedness_check(const ProblemInstance& prob,
                                     const LinearFeaturePolicy& pol,
                                     const TimeGrid& grid, std::size_t paths,
                                     std::uint64_t seed, std::size_t probes) {
  const NoiseEnsemble noise = sample_noise(grid, paths, seed);
  const PathEnsemble base = simulate_forward(prob, pol, noise);
  std::size_t violations = 0;
  RngStream rs(seed ^ 0xada97ed5ULL);
  const auto& fmap = pol.feature_map();
  for (std::size_t probe = 0; probe < probes; ++probe) {
    const std::size_t j = 1 + static_cast<std::size_t>(
        rs.uniform() * static_cast<double>(grid.N - 1));
    NoiseEnsemble mutated = noise;
    for (std::size_t i = 0; i < paths; ++i)
      for (std::size_t s = j; s < grid.N; ++s)
        mutated.dY[i * grid.N + s] += 1.0 + rs.normal();
    const PathEnsemble other = simulate_forward(prob, pol, mutated);

    std::vector<double> va(paths), vb(paths);
    for (std::size_t i = 0; i < paths; ++i) {
      va[i] = base.x_at(i, j)[0];
      vb[i] = other.x_at(i, j)[0];
      if (va[i] != vb[i]) ++violations;
      const auto ua = pol.evaluate(grid, j, base.y_prefix(i, j));
      const auto ub = pol.evaluate(grid, j, other.y_prefix(i, j));
      for (std::size_t c = 0; c < ua.size(); ++c)
        if (ua[c] != ub[c]) ++violations;
    }
    const auto fa = cond_expect_Y(va, base, fmap, j, -1.0);
    const auto fb = cond_expect_Y(vb, other, fmap, j, -1.0);
    for (std::size_t i = 0; i < paths; ++i)
      if (fa[i] != fb[i]) ++violations;
  }
  return violations;
}

/// Deterministic mildly-off policy used by the variational-formula check:
/// weight on the constant, t, Y and t*Y features.
inline LinearFeaturePolicy perturbed_test_policy(
    const ObservationFeatureMap& fmap, const ControlSet& uset) {
  const std::size_t F = fmap.count(), k = uset.dim();
  std::vector<double> theta(k * F, 0.0);
  for (std::size_t f = 0; f < F; ++f) {
    int total = 0;
    for (std::size_t v = 0; v < fmap.variable_count(); ++v)
      total += fmap.exponent(f, v);
    double w = 0.0;
    if (total == 0) w = -0.10;
    else if (total == 1 && fmap.exponent(f, 0) == 1) w = 0.20;
    else if (total == 1 && fmap.exponent(f, 1) == 1) w = -0.30;
    else if (total == 2 && fmap.exponent(f, 0) == 1 && fmap.exponent(f, 1) == 1)
      w = 0.10;
    for (std::size_t c = 0; c < k; ++c) theta[c * F + f] = w;
  }
  return LinearFeaturePolicy(fmap, uset, std::move(theta));
}

/// Direction paired with perturbed_test_policy for directional derivatives.
inline std::vector<double> perturbation_direction(
    const ObservationFeatureMap& fmap, std::size_t control_dim) {
  const std::size_t F = fmap.count();
  std::vector<double> delta(control_dim * F, 0.0);
  for (std::size_t f = 0; f < F; ++f) {
    int total = 0;
    for (std::size_t v = 0; v < fmap.variable_count(); ++v)
      total += fmap.exponent(f, v);
    double w = 0.0;
    if (total == 0) w = 1.0;
    else if (total == 1 && fmap.exponent(f, 0) == 1) w = 0.5;
    else if (total == 1 && fmap.exponent(f, 1) == 1) w = -1.0;
    else if (total == 2 && fmap.exponent(f, 0) == 1 && fmap.exponent(f, 1) == 1)
      w = 0.4;
    for (std::size_t c = 0; c < control_dim; ++c) delta[c * F + f] = w;
  }
  return delta;
}

struct ConvexitySpotcheckReport {
  std::size_t probes = 0;
  std::size_t H_violations = 0;
  std::size_t Phi_violations = 0;
  std::size_t gamma_violations = 0;
  bool hypothesis_probed = false;
  bool h_state_control_free = true;  // h(t,x,u) = h(t) probe result
};

/// Midpoint-convexity probes of H in (x, y, z1, z2, u) at random adjoint
/// points, plus Phi and gamma; optionally probes the sufficiency
/// hypothesis that h carries no (x, u) dependence.
inline ConvexitySpotcheckReport convexity_spotcheck(const ProblemInstance& prob,
                                                    std::size_t points,
                                                    std::uint64_t seed,
                                                    bool sufficient_report =
                                                        false) {
  const std::size_t n = prob.dims.n, m = prob.dims.m, k = prob.dims.k;
  ConvexitySpotcheckReport rep;
  rep.probes = points;
  RngStream rs(seed);
  const auto [ulo, uhi] = prob.control_set.interior_box();
  const auto& c = prob.coeffs;

  auto randv = [&](std::size_t len) {
    std::vector<double> v(len);
    for (auto& q : v) q = rs.normal();
    return v;
  };
  auto randu = [&]() {
    std::vector<double> v(k);
    for (std::size_t q = 0; q < k; ++q) v[q] = rs.uniform(ulo[q], uhi[q]);
    return v;
  };
  auto mid = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> v(a.size());
    for (std::size_t q = 0; q < a.size(); ++q) v[q] = 0.5 * (a[q] + b[q]);
    return v;
  };

  for (std::size_t s = 0; s < points; ++s) {
    const double t = rs.uniform(0.0, prob.dims.T);
    const std::vector<double> p = randv(n), q1 = randv(n), q2 = randv(n),
                              kv = randv(m);
    const double R2eff = rs.normal();
    const std::vector<double> xA = randv(n), xB = randv(n);
    const std::vector<double> yA = randv(m), yB = randv(m);
    const std::vector<double> z1A = randv(m), z1B = randv(m);
    const std::vector<double> z2A = randv(m), z2B = randv(m);
    const std::vector<double> uA = randu(), uB = randu();

    auto H_at = [&](const std::vector<double>& x, const std::vector<double>& y,
                    const std::vector<double>& z1,
                    const std::vector<double>& z2,
                    const std::vector<double>& u) {
      HamiltonianPoint pt;
      pt.t = t;
      pt.x = x;
      pt.y = y;
      pt.z1 = z1;
      pt.z2 = z2;
      pt.u = u;
      pt.p = p;
      pt.q1 = q1;
      pt.q2 = q2;
      pt.k = kv;
      pt.R2eff = R2eff;
      return eval_H(pt, c);
    };
    const double HA = H_at(xA, yA, z1A, z2A, uA);
    const double HB = H_at(xB, yB, z1B, z2B, uB);
    const double HM =
        H_at(mid(xA, xB), mid(yA, yB), mid(z1A, z1B), mid(z2A, z2B),
             mid(uA, uB));
    const double slack = 1e-9 * (1.0 + std::fabs(HA) + std::fabs(HB));
    if (HM > 0.5 * (HA + HB) + slack) ++rep.H_violations;

    const double PA = c.Phi(xA), PB = c.Phi(xB), PM = c.Phi(mid(xA, xB));
    if (PM > 0.5 * (PA + PB) + 1e-9 * (1.0 + std::fabs(PA) + std::fabs(PB)))
      ++rep.Phi_violations;
    if (m > 0) {
      const double gA = c.gamma(yA), gB = c.gamma(yB),
                   gM = c.gamma(mid(yA, yB));
      if (gM > 0.5 * (gA + gB) + 1e-9 * (1.0 + std::fabs(gA) + std::fabs(gB)))
        ++rep.gamma_violations;
    }

    if (sufficient_report) {
      rep.hypothesis_probed = true;
      const double hA = c.h(t, xA, uA);
      const double hB = c.h(t, xB, uB);
      if (std::fabs(hA - hB) > 1e-12 * (1.0 + std::fabs(hA)))
        rep.h_state_control_free = false;
    }
  }
  return rep;
}

}  // namespace fbsoc
