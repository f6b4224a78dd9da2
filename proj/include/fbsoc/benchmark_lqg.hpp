#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "fbsoc/filter.hpp"
#include "fbsoc/policy.hpp"
#include "fbsoc/problem.hpp"
#include "fbsoc/regression.hpp"
#include "fbsoc/simulate.hpp"

namespace fbsoc {

/// Scalar partially observed linear-quadratic benchmark:
///   dx = (a x + b_u u) dt + sigma dW,   dY = h dt + dW^u
/// with h = c x (observation carries state information) or, in the
/// time-only variant, h = h_t(t) (observation carries none; the form the
/// sufficiency certificates require). Cost: int (Q x^2 + R u^2) dt
/// + Q_T x(T)^2. No backward component (m = 0).
struct LQGSpec {
  double a = 0.0;
  double b_u = 1.0;
  double sigma = 1.0;
  double c = 1.0;
  double Q = 1.0;
  double R = 1.0;
  double Q_T = 0.0;
  double T = 1.0;
  double x0 = 0.5;
  double u_max = 4.0;
  bool h_time_only = false;
  std::function<double(double)> h_t;  // used when h_time_only

  /// Effective observation gain seen by the filter.
  double c_eff() const { return h_time_only ? 0.0 : c; }
};

inline LQGSpec golden_lqg() { return LQGSpec{}; }

inline LQGSpec lqg_htime() {
  LQGSpec s;
  s.h_time_only = true;
  s.h_t = [](double t) { return 0.5 * (1.0 + t); };
  return s;
}

/// Separation-principle oracle: control Riccati P backward, filter Riccati
/// Sigma forward, gain G = b_u P / R (optimal control u* = -G xhat), and
/// the optimal cost
///   J* = P(0) x0^2 + int_0^T [ P (c_eff Sigma)^2 + Q Sigma ] dt
///        + Q_T Sigma(T).
struct RiccatiOracle {
  double T = 1.0;
  std::size_t fine_steps = 0;
  std::vector<double> P, Sigma, G;  // nodes 0..fine_steps
  double Jstar = 0.0;

  double interp(const std::vector<double>& v, double t) const {
    const double s = std::clamp(t / T, 0.0, 1.0) * static_cast<double>(fine_steps);
    const std::size_t lo = std::min<std::size_t>(static_cast<std::size_t>(s),
                                                 fine_steps - 1);
    const double w = s - static_cast<double>(lo);
    return (1.0 - w) * v[lo] + w * v[lo + 1];
  }
  double P_at(double t) const { return interp(P, t); }
  double Sigma_at(double t) const { return interp(Sigma, t); }
  double G_at(double t) const { return interp(G, t); }
};

inline RiccatiOracle riccati_oracle(const LQGSpec& s, std::size_t fine_steps) {
  RiccatiOracle o;
  o.T = s.T;
  o.fine_steps = fine_steps;
  o.P.resize(fine_steps + 1);
  o.Sigma.resize(fine_steps + 1);
  o.G.resize(fine_steps + 1);
  const double h = s.T / static_cast<double>(fine_steps);
  const double ce = s.c_eff();

  // Control Riccati backward in t: dP/dt = -(2 a P + Q - b_u^2 P^2 / R).
  auto fP = [&](double P) {
    return -(2.0 * s.a * P + s.Q - s.b_u * s.b_u / s.R * P * P);
  };
  o.P[fine_steps] = s.Q_T;
  for (std::size_t i = fine_steps; i-- > 0;) {
    const double Pn = o.P[i + 1];
    const double k1 = fP(Pn);
    const double k2 = fP(Pn - 0.5 * h * k1);
    const double k3 = fP(Pn - 0.5 * h * k2);
    const double k4 = fP(Pn - h * k3);
    o.P[i] = Pn - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  // Filter Riccati forward: dSigma/dt = 2 a Sigma + sigma^2 - c^2 Sigma^2,
  // Sigma(0) = 0 (deterministic initial state).
  auto fS = [&](double S) {
    return 2.0 * s.a * S + s.sigma * s.sigma - ce * ce * S * S;
  };
  o.Sigma[0] = 0.0;
  for (std::size_t i = 0; i < fine_steps; ++i) {
    const double S = o.Sigma[i];
    const double k1 = fS(S);
    const double k2 = fS(S + 0.5 * h * k1);
    const double k3 = fS(S + 0.5 * h * k2);
    const double k4 = fS(S + h * k3);
    o.Sigma[i + 1] = S + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  for (std::size_t i = 0; i <= fine_steps; ++i)
    o.G[i] = s.b_u * o.P[i] / s.R;

  // Cost decomposition, trapezoid on the fine grid.
  double integral = 0.0;
  auto integrand = [&](std::size_t i) {
    const double K = ce * o.Sigma[i];
    return o.P[i] * K * K + s.Q * o.Sigma[i];
  };
  for (std::size_t i = 0; i < fine_steps; ++i)
    integral += 0.5 * h * (integrand(i) + integrand(i + 1));
  o.Jstar = o.P[0] * s.x0 * s.x0 + integral + s.Q_T * o.Sigma[fine_steps];
  return o;
}

/// The benchmark as a ProblemInstance (n = 1, m = 0, k = 1).
inline ProblemInstance make_lqg_problem(const LQGSpec& s,
                                        std::string label = "lqg") {
  Dimensions dims{1, 0, 1, s.T};
  CoefficientSet c;
  c.b = [s](double, Span x, Span u) {
    return std::vector<double>{s.a * x[0] + s.b_u * u[0]};
  };
  c.b_x = [s](double, Span, Span) { return std::vector<double>{s.a}; };
  c.b_u = [s](double, Span, Span) { return std::vector<double>{s.b_u}; };
  c.sigma1 = [s](double, Span, Span) { return std::vector<double>{s.sigma}; };
  c.sigma1_x = [](double, Span, Span) { return std::vector<double>{0.0}; };
  c.sigma1_u = [](double, Span, Span) { return std::vector<double>{0.0}; };
  c.sigma2 = [](double, Span, Span) { return std::vector<double>{0.0}; };
  c.sigma2_x = [](double, Span, Span) { return std::vector<double>{0.0}; };
  c.sigma2_u = [](double, Span, Span) { return std::vector<double>{0.0}; };
  if (s.h_time_only) {
    auto ht = s.h_t;
    c.h = [ht](double t, Span, Span) { return ht(t); };
    c.h_x = [](double, Span, Span) { return std::vector<double>{0.0}; };
  } else {
    c.h = [s](double, Span x, Span) { return s.c * x[0]; };
    c.h_x = [s](double, Span, Span) { return std::vector<double>{s.c}; };
  }
  c.h_u = [](double, Span, Span) { return std::vector<double>{0.0}; };
  c.l = [s](double, Span x, Span, Span, Span, Span u) {
    return s.Q * x[0] * x[0] + s.R * u[0] * u[0];
  };
  c.l_x = [s](double, Span x, Span, Span, Span, Span) {
    return std::vector<double>{2.0 * s.Q * x[0]};
  };
  c.l_u = [s](double, Span, Span, Span, Span, Span u) {
    return std::vector<double>{2.0 * s.R * u[0]};
  };
  c.Phi = [s](Span x) { return s.Q_T * x[0] * x[0]; };
  c.Phi_x = [s](Span x) { return std::vector<double>{2.0 * s.Q_T * x[0]}; };
  c.x0 = {s.x0};
  c.bound_C = 100.0;
  return build_problem(dims, std::move(c), ControlSet::symmetric_box(1, s.u_max),
                       std::move(label));
}

/// The separation-principle feedback u = -G(t) xhat(t), with xhat the
/// Kalman-Bucy mean integrated along the observed prefix. Adapted: the
/// value at step j is a function of Y_0..Y_j only.
class KalmanOraclePolicy final : public Policy {
 public:
  KalmanOraclePolicy(LQGSpec spec, const RiccatiOracle& oracle)
      : spec_(spec), oracle_(oracle), uset_(ControlSet::symmetric_box(1, spec.u_max)) {}

  std::size_t control_dim() const override { return 1; }

  std::vector<double> evaluate(const TimeGrid& grid, std::size_t j,
                               Span y_prefix) const override {
    const double ce = spec_.c_eff();
    double xhat = spec_.x0;
    for (std::size_t sjx = 0; sjx < j; ++sjx) {
      const double t = grid.node(sjx);
      const double u = feedback(t, xhat);
      const double K = ce * oracle_.Sigma_at(t);
      const double dY = y_prefix[sjx + 1] - y_prefix[sjx];
      xhat += (spec_.a * xhat + spec_.b_u * u) * grid.dt +
              K * (dY - ce * xhat * grid.dt);
    }
    return {feedback(grid.node(j), xhat)};
  }

  double feedback(double t, double xhat) const {
    std::vector<double> u{-oracle_.G_at(t) * xhat};
    uset_.project_in_place(u);
    return u[0];
  }

 private:
  LQGSpec spec_;
  const RiccatiOracle& oracle_;
  ControlSet uset_;
};

struct OracleFit {
  LinearFeaturePolicy policy;
  double action_rms = 0.0;
};

/// Least-squares fit of the feature policy to oracle actions along
/// oracle-driven trajectories; the returned policy is the best
/// representation of the separation feedback inside the policy class.
inline OracleFit oracle_policy_fit(const ProblemInstance& prob,
                                   const LQGSpec& spec,
                                   const RiccatiOracle& oracle,
                                   const ObservationFeatureMap& fmap,
                                   const TimeGrid& grid, std::size_t paths,
                                   std::uint64_t seed) {
  const KalmanOraclePolicy opol(spec, oracle);
  const NoiseEnsemble noise = sample_noise(grid, paths, seed);
  const PathEnsemble ens = simulate_forward(prob, opol, noise);
  const std::size_t N = grid.N, F = fmap.count();

  Eigen::MatrixXd X(paths * N, F);
  Eigen::VectorXd targets(paths * N);
  std::vector<double> feat(F);
  for (std::size_t i = 0; i < paths; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      fmap.eval(grid, j, ens.y_prefix(i, j), feat);
      for (std::size_t f = 0; f < F; ++f)
        X(static_cast<Eigen::Index>(i * N + j), static_cast<Eigen::Index>(f)) =
            feat[f];
      targets[i * N + j] = ens.u_at(i, j)[0];
    }
  RidgeRegression reg(std::move(X), -1.0);
  const Eigen::VectorXd beta = reg.coefficients(targets);
  const Eigen::VectorXd fit = reg.fitted(targets);
  const double rms = std::sqrt((fit - targets).squaredNorm() /
                               static_cast<double>(paths * N));

  std::vector<double> theta(beta.data(), beta.data() + beta.size());
  return {LinearFeaturePolicy(fmap, prob.control_set, std::move(theta)), rms};
}

}  // namespace fbsoc
