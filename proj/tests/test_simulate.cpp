#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fbsoc/policy.hpp"
#include "fbsoc/registry.hpp"
#include "fbsoc/simulate.hpp"

using namespace fbsoc;

namespace {

ProblemInstance driftless_bm() {
  Dimensions dims{1, 0, 1, 1.0};
  CoefficientSet c;
  auto zero1 = [](double, Span, Span) { return std::vector<double>{0.0}; };
  auto one1 = [](double, Span, Span) { return std::vector<double>{1.0}; };
  c.b = zero1;
  c.b_x = zero1;
  c.b_u = zero1;
  c.sigma1 = one1;
  c.sigma1_x = zero1;
  c.sigma1_u = zero1;
  c.sigma2 = zero1;
  c.sigma2_x = zero1;
  c.sigma2_u = zero1;
  c.h = [](double, Span, Span) { return 0.0; };
  c.h_x = zero1;
  c.h_u = zero1;
  c.l = [](double, Span, Span, Span, Span, Span) { return 0.0; };
  auto dzero = [](double, Span, Span, Span, Span, Span) {
    return std::vector<double>{0.0};
  };
  c.l_x = dzero;
  c.l_u = dzero;
  c.Phi = [](Span) { return 0.0; };
  c.Phi_x = [](Span) { return std::vector<double>{0.0}; };
  c.x0 = {0.25};
  return build_problem(dims, std::move(c), ControlSet::symmetric_box(1, 1.0),
                       "bm");
}

LinearFeaturePolicy zero_policy(const ProblemInstance& prob, std::size_t N) {
  return LinearFeaturePolicy::zero(ObservationFeatureMap::defaults(N),
                                   prob.control_set);
}

}  // namespace

TEST_CASE("sample_noise is deterministic and worker-invariant") {
  TimeGrid g1(1, 1.0);
  const auto a = sample_noise(g1, 1, 42);
  const auto b = sample_noise(g1, 1, 42);
  CHECK(a.dW == b.dW);
  CHECK(a.dY == b.dY);

  TimeGrid g(16, 1.0);
  const auto w1 = sample_noise(g, 1000, 7, 1);
  const auto w8 = sample_noise(g, 1000, 7, 8);
  CHECK(w1.dW == w8.dW);
  CHECK(w1.dY == w8.dY);
}

TEST_CASE("noise ensemble satisfies CLT bounds") {
  TimeGrid g(64, 1.0);
  const std::size_t M = 100000;
  const auto noise = sample_noise(g, M, 7, 2);
  const double cells = static_cast<double>(M * g.N);
  const MeanSe mw = mean_se(noise.dW);
  const MeanSe my = mean_se(noise.dY);
  const double bound = 4.0 / std::sqrt(cells) * std::sqrt(g.dt);
  CHECK(std::fabs(mw.mean) <= bound);
  CHECK(std::fabs(my.mean) <= bound);
  const double corr = sample_corr(noise.dW, noise.dY);
  CHECK(std::fabs(corr) <= 4.0 / std::sqrt(cells));
  // Variance of each cell should be near dt as well.
  double ss = 0.0;
  for (double v : noise.dW) ss += v * v;
  CHECK(ss / cells == doctest::Approx(g.dt).epsilon(0.01));
}

TEST_CASE("driftless unit-diffusion paths are exact partial sums") {
  const auto prob = driftless_bm();
  TimeGrid g(32, 1.0);
  const auto noise = sample_noise(g, 50, 3);
  const auto pol = zero_policy(prob, g.N);
  const auto ens = simulate_forward(prob, pol, noise);
  for (std::size_t i = 0; i < ens.paths; ++i) {
    double acc = prob.coeffs.x0[0];
    for (std::size_t j = 0; j < g.N; ++j) {
      acc += noise.dW_at(i, j);
      CHECK(ens.x_at(i, j + 1)[0] == acc);  // bit-exact
    }
    // h == 0 forces rho == 1 on every cell.
    for (std::size_t j = 0; j <= g.N; ++j) {
      CHECK(ens.logrho_at(i, j) == 0.0);
      CHECK(ens.rho_at(i, j) == 1.0);
    }
  }
}

TEST_CASE("constant h has the closed-form log density") {
  auto prob = driftless_bm();
  const double hc = 0.8;
  prob.coeffs.h = [hc](double, Span, Span) { return hc; };
  TimeGrid g(64, 1.0);
  const auto noise = sample_noise(g, 40, 11);
  const auto ens = simulate_forward(prob, zero_policy(prob, g.N), noise);
  for (std::size_t i = 0; i < ens.paths; ++i) {
    const double expect = hc * ens.Y_at(i, g.N) - 0.5 * hc * hc * g.T;
    CHECK(ens.logrho_at(i, g.N) == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("martingale check: trivial and LQG") {
  const auto prob = driftless_bm();
  TimeGrid g(16, 1.0);
  const auto ens =
      simulate_forward(prob, zero_policy(prob, g.N), sample_noise(g, 100, 5));
  const auto rows = density_martingale_check(ens, {4, 8, 16});
  for (const auto& r : rows) {
    CHECK(r.mean == 1.0);
    CHECK(r.z == 0.0);
  }

  const auto lqg = make_named_problem("lqg");
  TimeGrid gl(64, 1.0);
  const auto el = simulate_forward(lqg.problem, zero_policy(lqg.problem, gl.N),
                                   sample_noise(gl, 20000, 17), 2);
  const auto rl = density_martingale_check(el, {16, 32, 64});
  for (const auto& r : rl) {
    INFO("step ", r.step, " mean ", r.mean, " z ", r.z);
    CHECK(std::fabs(r.z) <= 3.9);
  }
}

TEST_CASE("martingale check reports NaN SE on a single path") {
  const auto prob = driftless_bm();
  TimeGrid g(8, 1.0);
  const auto ens =
      simulate_forward(prob, zero_policy(prob, g.N), sample_noise(g, 1, 5));
  const auto rows = density_martingale_check(ens, {8});
  CHECK(std::isnan(rows[0].se));
  CHECK(std::isnan(rows[0].z));
}

TEST_CASE("moment diagnostics on degenerate instances") {
  // Deterministic state: E[sup |x|^4] = |x0|^4 with zero SE.
  auto prob = driftless_bm();
  prob.coeffs.sigma1 = [](double, Span, Span) {
    return std::vector<double>{0.0};
  };
  TimeGrid g(64, 1.0);
  const auto noise = sample_noise(g, 30, 2);

  // Constant control: the admissibility statistic is |u0|^4 T^2 exactly.
  const double u0 = 0.5;
  const auto pol = LinearFeaturePolicy::constant(
      ObservationFeatureMap::defaults(g.N), prob.control_set,
      std::vector<double>{u0});
  const auto ens = simulate_forward(prob, pol, noise);
  const auto diag = moment_diagnostics(ens);
  const double x0 = 0.25;
  CHECK(diag.sup_x4.mean == doctest::Approx(x0 * x0 * x0 * x0).epsilon(1e-14));
  CHECK(diag.sup_rho2.mean == 1.0);
  CHECK(diag.sup_rho4.mean == 1.0);
  CHECK(diag.u_l4.mean ==
        doctest::Approx(u0 * u0 * u0 * u0 * g.T * g.T).epsilon(1e-13));
  CHECK(diag.u_l4.se <= 1e-15);
}

TEST_CASE("simulate_forward is worker-invariant and policy-adapted") {
  const auto lqg = make_named_problem("lqg");
  TimeGrid g(32, 1.0);
  const auto noise = sample_noise(g, 500, 23);
  // A nonzero adapted policy.
  auto pol = LinearFeaturePolicy::zero(ObservationFeatureMap::defaults(g.N),
                                       lqg.problem.control_set);
  pol.theta()[0] = 0.3;
  pol.theta()[2] = -0.4;

  const auto e1 = simulate_forward(lqg.problem, pol, noise, 1);
  const auto e3 = simulate_forward(lqg.problem, pol, noise, 3);
  CHECK(e1.x == e3.x);
  CHECK(e1.u == e3.u);
  CHECK(e1.logrho == e3.logrho);

  // Mutating dY after step j leaves everything through step j bit-identical.
  NoiseEnsemble mutated = noise;
  const std::size_t cut = 12;
  for (std::size_t i = 0; i < mutated.paths; ++i)
    for (std::size_t j = cut; j < g.N; ++j) mutated.dY[i * g.N + j] += 5.0;
  const auto em = simulate_forward(lqg.problem, pol, mutated, 1);
  for (std::size_t i = 0; i < noise.paths; ++i) {
    for (std::size_t j = 0; j <= cut; ++j) {
      CHECK(em.x_at(i, j)[0] == e1.x_at(i, j)[0]);
      CHECK(em.Y_at(i, j) == e1.Y_at(i, j));
    }
    for (std::size_t j = 0; j < cut; ++j)
      CHECK(em.u_at(i, j)[0] == e1.u_at(i, j)[0]);
    // u at the cut step uses Y only up to the cut node.
    CHECK(em.u_at(i, cut)[0] == e1.u_at(i, cut)[0]);
  }
}

TEST_CASE("innovation increments telescope to Y(T) - int h dt") {
  const auto lqg = make_named_problem("lqg");
  TimeGrid g(64, 1.0);
  const auto noise = sample_noise(g, 100, 31);
  const auto ens =
      simulate_forward(lqg.problem, zero_policy(lqg.problem, g.N), noise);
  for (std::size_t i = 0; i < ens.paths; ++i) {
    double sum_innov = 0.0, sum_h = 0.0;
    for (std::size_t j = 0; j < g.N; ++j) {
      sum_innov += ens.innovation(noise, i, j);
      sum_h += ens.h_at(i, j) * g.dt;
    }
    CHECK(sum_innov ==
          doctest::Approx(ens.Y_at(i, g.N) - sum_h).epsilon(1e-12));
  }
}

TEST_CASE("NonFinite reports the first offending path and step") {
  auto prob = driftless_bm();
  prob.coeffs.b = [](double, Span x, Span) {
    return std::vector<double>{x[0] * x[0] * 1e4};
  };
  prob.coeffs.x0 = {10.0};
  TimeGrid g(16, 1.0);
  const auto noise = sample_noise(g, 4, 1);
  bool threw = false;
  try {
    simulate_forward(prob, zero_policy(prob, g.N), noise);
  } catch (const NonFinite& e) {
    threw = true;
    CHECK(e.path == 0);
    CHECK(e.step >= 1);
  }
  CHECK(threw);
}
