#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fbsoc/registry.hpp"
#include "fbsoc/verify.hpp"

using namespace fbsoc;

namespace {
ObservationFeatureMap const_fmap() { return ObservationFeatureMap({1}, 0); }
}  // namespace

TEST_CASE("fd derivative along the zero direction is exactly zero") {
  const auto np = make_named_problem("quad_toy");
  TimeGrid g(16, 1.0);
  const auto pol = LinearFeaturePolicy::constant(
      const_fmap(), np.problem.control_set, std::vector<double>{0.1});
  const std::vector<double> delta(pol.param_count(), 0.0);
  const auto rep = fd_directional_derivative(np.problem, pol, delta,
                                             {0.2, 0.1}, g, 40, 3,
                                             RegressionBasis(0));
  for (double v : rep.fd) CHECK(v == 0.0);
  CHECK(rep.richardson == 0.0);
}

TEST_CASE("fd derivative matches the quadratic closed form") {
  const auto np = make_named_problem("quad_toy");
  TimeGrid g(32, 1.0);
  const double theta0 = -0.2;
  const auto pol = LinearFeaturePolicy::constant(
      const_fmap(), np.problem.control_set, std::vector<double>{theta0});
  const std::vector<double> delta{1.0};
  const auto rep = fd_directional_derivative(np.problem, pol, delta, {1e-3},
                                             g, 60, 5, RegressionBasis(0));
  const double truth = 2.0 * (theta0 - kQuadToyUstar);
  CHECK(std::fabs(rep.fd[0] - truth) <= 1e-6);
  CHECK(std::fabs(rep.analytic - truth) <= 1e-6);

  // FD error is non-increasing as eps shrinks on this instance.
  const auto sweep = fd_directional_derivative(
      np.problem, pol, delta, {0.4, 0.2, 0.1, 0.05}, g, 60, 5,
      RegressionBasis(0));
  double prev = std::fabs(sweep.fd[0] - truth);
  for (std::size_t i = 1; i < sweep.fd.size(); ++i) {
    const double cur = std::fabs(sweep.fd[i] - truth);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("cost-difference identity: identical policies give exact zeros") {
  const auto np = make_named_problem("lq_fbsde");
  TimeGrid g(16, 1.0);
  const auto pol = LinearFeaturePolicy::constant(
      ObservationFeatureMap::defaults(16), np.problem.control_set,
      std::vector<double>{0.4});
  const auto rep =
      cost_difference_check(np.problem, pol, pol, g, 200, 7);
  CHECK(rep.lhs == 0.0);
  CHECK(rep.rhs == 0.0);
  CHECK(rep.z == 0.0);
  for (const auto& [name, value] : rep.terms) {
    INFO(name);
    CHECK(value == 0.0);
  }
}

TEST_CASE("cost-difference identity: zero problem gives zero terms") {
  // All costs and data zero; nontrivial dynamics and density.
  auto np = make_named_problem("lq_fbsde");
  auto prob = np.problem;
  auto dz = [](double, Span, Span, Span, Span, Span) {
    return std::vector<double>{0.0};
  };
  prob.coeffs.l = [](double, Span, Span, Span, Span, Span) { return 0.0; };
  prob.coeffs.l_x = dz;
  prob.coeffs.l_y = dz;
  prob.coeffs.l_z1 = dz;
  prob.coeffs.l_z2 = dz;
  prob.coeffs.l_u = dz;
  prob.coeffs.Phi = [](Span) { return 0.0; };
  prob.coeffs.Phi_x = [](Span) { return std::vector<double>{0.0}; };
  prob.coeffs.phi = [](Span) { return std::vector<double>{0.0}; };
  prob.coeffs.phi_x = [](Span) { return std::vector<double>{0.0}; };
  prob.coeffs.gamma = [](Span) { return 0.0; };
  prob.coeffs.gamma_y = [](Span) { return std::vector<double>{0.0}; };
  prob.coeffs.f = dz;
  prob.coeffs.f_x = dz;
  prob.coeffs.f_y = dz;
  prob.coeffs.f_z1 = dz;
  prob.coeffs.f_z2 = dz;
  prob.coeffs.f_u = dz;
  TimeGrid g(16, 1.0);
  const auto pa = LinearFeaturePolicy::constant(
      ObservationFeatureMap::defaults(16), prob.control_set,
      std::vector<double>{0.8});
  const auto pb = LinearFeaturePolicy::constant(
      ObservationFeatureMap::defaults(16), prob.control_set,
      std::vector<double>{-0.4});
  const auto rep = cost_difference_check(prob, pa, pb, g, 300, 9);
  CHECK(rep.lhs == 0.0);
  for (const auto& [name, value] : rep.terms) {
    INFO(name);
    CHECK(value == 0.0);
  }
}

TEST_CASE("cost-difference identity holds on the linear-quadratic instance") {
  const auto np = make_named_problem("lq_fbsde");
  TimeGrid g(64, 1.0);
  const auto pa = LinearFeaturePolicy::constant(
      ObservationFeatureMap::defaults(64), np.problem.control_set,
      std::vector<double>{0.8});
  const auto pb = LinearFeaturePolicy::constant(
      ObservationFeatureMap::defaults(64), np.problem.control_set,
      std::vector<double>{-0.4});
  const auto rep =
      cost_difference_check(np.problem, pa, pb, g, 8000, 11);
  INFO("lhs ", rep.lhs, " rhs ", rep.rhs, " se ", rep.se, " z ", rep.z);
  CHECK(std::fabs(rep.lhs - rep.rhs) <=
        std::max(3.0 * rep.se, 0.05 * std::fabs(rep.lhs)));
}

TEST_CASE("perturbation at eps = 0 changes nothing") {
  const auto np = make_named_problem("lq_fbsde");
  TimeGrid g(16, 1.0);
  const auto noise = sample_noise(g, 100, 3);
  const auto pa = LinearFeaturePolicy::constant(
      ObservationFeatureMap::defaults(16), np.problem.control_set,
      std::vector<double>{0.5});
  const auto pb = LinearFeaturePolicy::constant(
      ObservationFeatureMap::defaults(16), np.problem.control_set,
      std::vector<double>{-0.5});
  const BlendPolicy blend(pa, pb, 0.0, np.problem.control_set);
  const auto base = simulate_forward(np.problem, pa, noise);
  const auto same = simulate_forward(np.problem, blend, noise);
  CHECK(base.x == same.x);
  CHECK(base.logrho == same.logrho);
}

TEST_CASE("perturbation orders match the expected rates") {
  const auto np = make_named_problem("lq_fbsde");
  TimeGrid g(64, 1.0);
  const auto pa = LinearFeaturePolicy::constant(
      ObservationFeatureMap::defaults(64), np.problem.control_set,
      std::vector<double>{0.9});
  const auto pb = LinearFeaturePolicy::constant(
      ObservationFeatureMap::defaults(64), np.problem.control_set,
      std::vector<double>{-0.9});
  const auto rep = perturbation_order_check(np.problem, pa, pb,
                                            {0.4, 0.2, 0.1}, g, 4000, 13);
  INFO("x slope ", rep.x_slope, " y slope ", rep.y_slope, " rho slope ",
       rep.rho_slope);
  CHECK(rep.x_slope >= 3.5);
  CHECK(rep.x_slope <= 4.5);
  CHECK(rep.y_slope >= 3.5);
  CHECK(rep.y_slope <= 4.5);
  CHECK(rep.rho_slope >= 1.6);
  CHECK(rep.rho_slope <= 2.4);
}

TEST_CASE("convexity spotcheck: quadratic instances are clean") {
  const auto np = make_named_problem("lqg");
  const auto rep = convexity_spotcheck(np.problem, 10000, 17);
  CHECK(rep.H_violations == 0);
  CHECK(rep.Phi_violations == 0);
  CHECK(rep.gamma_violations == 0);
}

TEST_CASE("convexity spotcheck flags a concave direction") {
  auto np = make_named_problem("quad_toy");
  auto prob = np.problem;
  prob.coeffs.l = [](double, Span, Span, Span, Span, Span u) {
    return -u[0] * u[0];
  };
  prob.coeffs.l_u = [](double, Span, Span, Span, Span, Span u) {
    return std::vector<double>{-2.0 * u[0]};
  };
  const auto rep = convexity_spotcheck(prob, 2000, 19);
  CHECK(rep.H_violations > 0);
}

TEST_CASE("sufficiency hypothesis probe detects state-dependent h") {
  const auto lqg = make_named_problem("lqg");         // h = c x
  const auto rep = convexity_spotcheck(lqg.problem, 500, 21, true);
  CHECK(rep.hypothesis_probed);
  CHECK_FALSE(rep.h_state_control_free);

  const auto htime = make_named_problem("lqg_htime");  // h = h(t)
  const auto rep2 = convexity_spotcheck(htime.problem, 500, 23, true);
  CHECK(rep2.h_state_control_free);
}

TEST_CASE("comparison checks are seed-stable (flake budget)") {
  const auto toy = make_named_problem("quad_toy_noisy");
  const auto lq = make_named_problem("lq_fbsde");
  TimeGrid g(32, 1.0);
  int fd_pass = 0, identity_pass = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(s);
    const auto pol = LinearFeaturePolicy::constant(
        const_fmap(), toy.problem.control_set, std::vector<double>{0.3});
    const auto rep = fd_directional_derivative(
        toy.problem, pol, {1.0}, {0.2, 0.1, 0.05}, g, 2000, seed);
    if (std::fabs(rep.richardson - rep.analytic) <=
        0.10 * std::max(1e-12, std::fabs(rep.richardson)))
      ++fd_pass;

    const auto pa = LinearFeaturePolicy::constant(
        ObservationFeatureMap::defaults(32), lq.problem.control_set,
        std::vector<double>{0.8});
    const auto pb = LinearFeaturePolicy::constant(
        ObservationFeatureMap::defaults(32), lq.problem.control_set,
        std::vector<double>{-0.4});
    const auto l4 = cost_difference_check(lq.problem, pa, pb, g, 2000, seed);
    if (std::fabs(l4.lhs - l4.rhs) <=
        std::max(3.0 * l4.se, 0.05 * std::fabs(l4.lhs)))
      ++identity_pass;
  }
  INFO("fd_pass ", fd_pass, " identity_pass ", identity_pass);
  CHECK(fd_pass >= 19);
  CHECK(identity_pass >= 19);
}
