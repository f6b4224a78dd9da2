#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fbsoc/benchmark_lqg.hpp"
#include "fbsoc/problem.hpp"

namespace fbsoc {

/// A shipped benchmark problem, selectable by name. User problems are
/// registered programmatically through build_problem; only benchmarks go
/// through this registry.
struct NamedProblem {
  ProblemInstance problem;
  std::optional<LQGSpec> lqg;
  /// Feature-map lags recommended for policy optimization on this problem.
  std::vector<std::size_t> policy_lags;
  int policy_degree = 2;
};

namespace detail {

/// Quadratic control toy: J(theta) = T (theta - ustar)^2 for a constant
/// policy. No noise, no state feedback; the gradient estimator is exact.
inline ProblemInstance make_quad_toy(double ustar) {
  Dimensions dims{1, 0, 1, 1.0};
  CoefficientSet c;
  auto zero1 = [](double, Span, Span) { return std::vector<double>{0.0}; };
  c.b = zero1;
  c.b_x = zero1;
  c.b_u = zero1;
  c.sigma1 = zero1;
  c.sigma1_x = zero1;
  c.sigma1_u = zero1;
  c.sigma2 = zero1;
  c.sigma2_x = zero1;
  c.sigma2_u = zero1;
  c.h = [](double, Span, Span) { return 0.0; };
  c.h_x = zero1;
  c.h_u = zero1;
  c.l = [ustar](double, Span, Span, Span, Span, Span u) {
    return (u[0] - ustar) * (u[0] - ustar);
  };
  c.l_x = [](double, Span, Span, Span, Span, Span) {
    return std::vector<double>{0.0};
  };
  c.l_u = [ustar](double, Span, Span, Span, Span, Span u) {
    return std::vector<double>{2.0 * (u[0] - ustar)};
  };
  c.Phi = [](Span) { return 0.0; };
  c.Phi_x = [](Span) { return std::vector<double>{0.0}; };
  c.x0 = {0.0};
  return build_problem(dims, std::move(c), ControlSet::symmetric_box(1, 2.0),
                       "quad_toy");
}

/// Noisy variant with controlled state: dx = u dt + dW, cost
/// int (u - ustar)^2 + x^2 dt. For a constant policy u = theta,
/// J(theta) = T (theta - ustar)^2 + theta^2 T^3 / 3 + T^2 / 2 (x0 = 0).
inline ProblemInstance make_quad_toy_noisy(double ustar) {
  Dimensions dims{1, 0, 1, 1.0};
  CoefficientSet c;
  auto zero1 = [](double, Span, Span) { return std::vector<double>{0.0}; };
  auto one1 = [](double, Span, Span) { return std::vector<double>{1.0}; };
  c.b = [](double, Span, Span u) { return std::vector<double>{u[0]}; };
  c.b_x = zero1;
  c.b_u = one1;
  c.sigma1 = one1;
  c.sigma1_x = zero1;
  c.sigma1_u = zero1;
  c.sigma2 = zero1;
  c.sigma2_x = zero1;
  c.sigma2_u = zero1;
  c.h = [](double, Span, Span) { return 0.0; };
  c.h_x = zero1;
  c.h_u = zero1;
  c.l = [ustar](double, Span x, Span, Span, Span, Span u) {
    return (u[0] - ustar) * (u[0] - ustar) + x[0] * x[0];
  };
  c.l_x = [](double, Span x, Span, Span, Span, Span) {
    return std::vector<double>{2.0 * x[0]};
  };
  c.l_u = [ustar](double, Span, Span, Span, Span, Span u) {
    return std::vector<double>{2.0 * (u[0] - ustar)};
  };
  c.Phi = [](Span) { return 0.0; };
  c.Phi_x = [](Span) { return std::vector<double>{0.0}; };
  c.x0 = {0.0};
  return build_problem(dims, std::move(c), ControlSet::symmetric_box(1, 2.0),
                       "quad_toy_noisy");
}

/// Scalar linear-quadratic FBSDE instance exercising the full machinery
/// (m = 1, correlated observation noise, backward component in the cost).
inline ProblemInstance make_lq_fbsde() {
  Dimensions dims{1, 1, 1, 1.0};
  const double a = -0.5, bu = 1.0, s1 = 0.8, s2 = 0.3, ch = 0.5;
  const double fx = 0.3, fy = -0.4, fz1 = 0.2, fz2 = 0.1, fu = 0.25;
  const double phic = 0.8, Q = 1.0, R = 1.0, Qy = 0.5, QT = 1.0, gy = 0.5;
  CoefficientSet c;
  auto cvec = [](double v) {
    return [v](double, Span, Span) { return std::vector<double>{v}; };
  };
  c.b = [=](double, Span x, Span u) {
    return std::vector<double>{a * x[0] + bu * u[0]};
  };
  c.b_x = cvec(a);
  c.b_u = cvec(bu);
  c.sigma1 = cvec(s1);
  c.sigma1_x = cvec(0.0);
  c.sigma1_u = cvec(0.0);
  c.sigma2 = cvec(s2);
  c.sigma2_x = cvec(0.0);
  c.sigma2_u = cvec(0.0);
  c.h = [=](double, Span x, Span) { return ch * x[0]; };
  c.h_x = cvec(ch);
  c.h_u = cvec(0.0);
  c.f = [=](double, Span x, Span y, Span z1, Span z2, Span u) {
    return std::vector<double>{fx * x[0] + fy * y[0] + fz1 * z1[0] +
                               fz2 * z2[0] + fu * u[0]};
  };
  auto dvec = [](double v) {
    return [v](double, Span, Span, Span, Span, Span) {
      return std::vector<double>{v};
    };
  };
  c.f_x = dvec(fx);
  c.f_y = dvec(fy);
  c.f_z1 = dvec(fz1);
  c.f_z2 = dvec(fz2);
  c.f_u = dvec(fu);
  c.phi = [=](Span x) { return std::vector<double>{phic * x[0]}; };
  c.phi_x = [=](Span) { return std::vector<double>{phic}; };
  c.l = [=](double, Span x, Span y, Span, Span, Span u) {
    return 0.5 * (Q * x[0] * x[0] + R * u[0] * u[0] + Qy * y[0] * y[0]);
  };
  c.l_x = [=](double, Span x, Span, Span, Span, Span) {
    return std::vector<double>{Q * x[0]};
  };
  c.l_y = [=](double, Span, Span y, Span, Span, Span) {
    return std::vector<double>{Qy * y[0]};
  };
  c.l_z1 = dvec(0.0);
  c.l_z2 = dvec(0.0);
  c.l_u = [=](double, Span, Span, Span, Span, Span u) {
    return std::vector<double>{R * u[0]};
  };
  c.Phi = [=](Span x) { return 0.5 * QT * x[0] * x[0]; };
  c.Phi_x = [=](Span x) { return std::vector<double>{QT * x[0]}; };
  c.gamma = [=](Span y) { return 0.5 * gy * y[0] * y[0]; };
  c.gamma_y = [=](Span y) { return std::vector<double>{gy * y[0]}; };
  c.x0 = {0.5};
  c.bound_C = 100.0;
  return build_problem(dims, std::move(c), ControlSet::symmetric_box(1, 1.5),
                       "lq_fbsde");
}

}  // namespace detail

inline constexpr double kQuadToyUstar = 0.7;

inline std::vector<std::string> problem_names() {
  return {"lqg", "lqg_htime", "quad_toy", "quad_toy_noisy", "lq_fbsde"};
}

inline NamedProblem make_named_problem(const std::string& name) {
  if (name == "lqg") {
    const LQGSpec spec = golden_lqg();
    return {make_lqg_problem(spec, "lqg"), spec, {1, 8, 16, 32}, 2};
  }
  if (name == "lqg_htime") {
    const LQGSpec spec = lqg_htime();
    return {make_lqg_problem(spec, "lqg_htime"), spec, {1, 8, 16, 32}, 2};
  }
  if (name == "quad_toy")
    return {detail::make_quad_toy(kQuadToyUstar), std::nullopt, {1, 8}, 2};
  if (name == "quad_toy_noisy")
    return {detail::make_quad_toy_noisy(kQuadToyUstar), std::nullopt, {1, 8}, 2};
  if (name == "lq_fbsde")
    return {detail::make_lq_fbsde(), std::nullopt, {1, 8}, 2};
  throw ConfigError("unknown problem name: " + name);
}

}  // namespace fbsoc
