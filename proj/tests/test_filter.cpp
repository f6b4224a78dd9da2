#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fbsoc/filter.hpp"
#include "fbsoc/registry.hpp"
#include "fbsoc/simulate.hpp"

using namespace fbsoc;

namespace {

PathEnsemble lqg_ensemble(std::size_t N, std::size_t M, std::uint64_t seed,
                          NoiseEnsemble* noise_out = nullptr) {
  const auto np = make_named_problem("lqg");
  TimeGrid g(N, 1.0);
  auto noise = sample_noise(g, M, seed);
  auto ens = simulate_forward(
      np.problem,
      LinearFeaturePolicy::zero(ObservationFeatureMap::defaults(N),
                                np.problem.control_set),
      noise);
  if (noise_out) *noise_out = std::move(noise);
  return ens;
}

// lq_fbsde has a mild observation gain, so the fitted density stays well
// away from the floor.
PathEnsemble tame_ensemble(std::size_t N, std::size_t M, std::uint64_t seed) {
  const auto np = make_named_problem("lq_fbsde");
  TimeGrid g(N, 1.0);
  const auto noise = sample_noise(g, M, seed);
  return simulate_forward(
      np.problem,
      LinearFeaturePolicy::zero(ObservationFeatureMap::defaults(N),
                                np.problem.control_set),
      noise);
}

}  // namespace

TEST_CASE("values independent of Y regress to the mean") {
  const auto ens = lqg_ensemble(16, 4000, 3);
  const ObservationFeatureMap fmap = ObservationFeatureMap::defaults(16);
  const std::size_t j = 8;
  // Fresh noise, unrelated to the ensemble.
  std::vector<double> values(ens.paths);
  RngStream rs(99);
  for (auto& v : values) v = 2.0 + rs.normal();
  ObservationRegression reg(ens, fmap, j, 0.0);
  const auto fit = reg.cond_expect(values);
  const MeanSe ms = mean_se(values);
  double sd = 0.0;
  for (double v : values) sd += (v - ms.mean) * (v - ms.mean);
  sd = std::sqrt(sd / static_cast<double>(values.size()));
  double max_lev = 0.0;
  for (std::size_t i = 0; i < ens.paths; ++i)
    max_lev = std::max(max_lev, reg.leverage(i));
  const double bound = 4.0 * sd * std::sqrt(max_lev);
  for (std::size_t i = 0; i < ens.paths; ++i)
    CHECK(std::fabs(fit[i] - ms.mean) <= bound);
}

TEST_CASE("regressing Y_j on the features recovers Y_j") {
  const auto ens = lqg_ensemble(16, 2000, 5);
  const ObservationFeatureMap fmap = ObservationFeatureMap::defaults(16);
  const std::size_t j = 10;
  std::vector<double> values(ens.paths);
  for (std::size_t i = 0; i < ens.paths; ++i) values[i] = ens.Y_at(i, j);
  const auto fit = cond_expect_Y(values, ens, fmap, j, 0.0);
  double ssr = 0.0, sst = 0.0;
  const MeanSe ms = mean_se(values);
  for (std::size_t i = 0; i < ens.paths; ++i) {
    ssr += (fit[i] - values[i]) * (fit[i] - values[i]);
    sst += (values[i] - ms.mean) * (values[i] - ms.mean);
  }
  CHECK(1.0 - ssr / sst >= 0.999);
}

TEST_CASE("bayes ratio equals plain conditioning when rho = 1") {
  // h == 0 instance: rho is identically one.
  const auto np = make_named_problem("quad_toy_noisy");
  TimeGrid g(16, 1.0);
  const auto noise = sample_noise(g, 1500, 7);
  const auto ens = simulate_forward(
      np.problem,
      LinearFeaturePolicy::constant(ObservationFeatureMap::defaults(16),
                                    np.problem.control_set,
                                    std::vector<double>{0.3}),
      noise);
  const ObservationFeatureMap fmap = ObservationFeatureMap::defaults(16);
  std::vector<double> values(ens.paths);
  for (std::size_t i = 0; i < ens.paths; ++i) values[i] = ens.x_at(i, 9)[0];
  const auto plain = cond_expect_Y(values, ens, fmap, 9, 0.0);
  const auto bayes = bayes_cond_expect(values, ens, fmap, 9, 0.0);
  for (std::size_t i = 0; i < ens.paths; ++i)
    CHECK(bayes[i] == doctest::Approx(plain[i]).epsilon(1e-10));
}

TEST_CASE("bayes ratio of a constant is the constant") {
  const auto ens = tame_ensemble(16, 2000, 11);
  const ObservationFeatureMap fmap = ObservationFeatureMap::defaults(16);
  std::vector<double> values(ens.paths, 2.5);
  std::size_t floored = 97;
  const auto est = bayes_cond_expect(values, ens, fmap, 12, 0.0, &floored);
  REQUIRE(floored == 0);
  for (double v : est) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("tower consistency of the in-sample Bayes ratio") {
  const auto ens = tame_ensemble(16, 2000, 13);
  const ObservationFeatureMap fmap = ObservationFeatureMap::defaults(16);
  const std::size_t j = 8;
  std::vector<double> values(ens.paths);
  for (std::size_t i = 0; i < ens.paths; ++i) values[i] = ens.x_at(i, j)[0];
  ObservationRegression reg(ens, fmap, j, 0.0);
  std::size_t floored = 97;
  const auto bayes = reg.bayes(values, &floored);
  REQUIRE(floored == 0);
  const auto& denom = reg.fitted_density();
  double weighted = 0.0, direct = 0.0;
  for (std::size_t i = 0; i < ens.paths; ++i) {
    weighted += bayes[i] * denom[i];
    direct += ens.rho_at(i, j) * values[i];
  }
  weighted /= static_cast<double>(ens.paths);
  direct /= static_cast<double>(ens.paths);
  CHECK(weighted == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("degenerate density is loud") {
  // Hand-built ensemble whose density collapsed to ~0 on every path.
  PathEnsemble ens;
  ens.grid = TimeGrid(4, 1.0);
  ens.paths = 64;
  ens.n = 1;
  ens.k = 1;
  ens.x.assign(64 * 5, 0.0);
  ens.Y.assign(64 * 5, 0.0);
  ens.logrho.assign(64 * 5, -800.0);
  ens.u.assign(64 * 4, 0.0);
  ens.h_val.assign(64 * 4, 0.0);
  RngStream rs(1);
  for (auto& v : ens.Y) v = rs.normal();
  const ObservationFeatureMap fmap({1}, 1);
  std::vector<double> values(ens.paths, 1.0);
  CHECK_THROWS_AS(bayes_cond_expect(values, ens, fmap, 2, -1.0),
                  DegenerateDensity);
}

TEST_CASE("conditioning at step j ignores later observations") {
  NoiseEnsemble noise;
  const std::size_t N = 16, M = 600, j = 9;
  const auto np = make_named_problem("lqg");
  TimeGrid g(N, 1.0);
  noise = sample_noise(g, M, 21);
  auto pol = LinearFeaturePolicy::zero(ObservationFeatureMap::defaults(N),
                                       np.problem.control_set);
  pol.theta()[1] = 0.2;
  const auto base = simulate_forward(np.problem, pol, noise);

  NoiseEnsemble mutated = noise;
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t s = j; s < N; ++s) mutated.dY[i * N + s] -= 3.0;
  const auto other = simulate_forward(np.problem, pol, mutated);

  const ObservationFeatureMap fmap = ObservationFeatureMap::defaults(N);
  std::vector<double> va(M), vb(M);
  for (std::size_t i = 0; i < M; ++i) {
    va[i] = base.x_at(i, j)[0];
    vb[i] = other.x_at(i, j)[0];
    REQUIRE(va[i] == vb[i]);
  }
  const auto fa = cond_expect_Y(va, base, fmap, j, -1.0);
  const auto fb = cond_expect_Y(vb, other, fmap, j, -1.0);
  for (std::size_t i = 0; i < M; ++i) CHECK(fa[i] == fb[i]);
}

TEST_CASE("eval_cost trivial values") {
  // l = 0, Phi = 0, gamma = c: J = c with zero SE.
  {
    auto np = make_named_problem("lq_fbsde");
    auto prob = np.problem;
    prob.coeffs.l = [](double, Span, Span, Span, Span, Span) { return 0.0; };
    prob.coeffs.Phi = [](Span) { return 0.0; };
    prob.coeffs.gamma = [](Span) { return 3.75; };
    TimeGrid g(8, 1.0);
    const auto noise = sample_noise(g, 50, 3);
    const auto ens = simulate_forward(
        prob,
        LinearFeaturePolicy::zero(ObservationFeatureMap::defaults(8),
                                  prob.control_set),
        noise);
    RegressionBasis basis;
    const auto back = solve_backward(prob, ens, noise, basis);
    const auto cost = eval_cost(prob, ens, back);
    CHECK(cost.J == doctest::Approx(3.75).epsilon(1e-15));
    CHECK(cost.se == 0.0);
  }
  // l = 1, Phi = 0: J = T within 3 SE under a nontrivial density.
  {
    auto np = make_named_problem("lqg");
    auto prob = np.problem;
    prob.coeffs.l = [](double, Span, Span, Span, Span, Span) { return 1.0; };
    prob.coeffs.Phi = [](Span) { return 0.0; };
    TimeGrid g(32, 1.0);
    const auto noise = sample_noise(g, 20000, 9);
    const auto ens = simulate_forward(
        prob,
        LinearFeaturePolicy::zero(ObservationFeatureMap::defaults(32),
                                  prob.control_set),
        noise);
    const auto cost = eval_cost(prob, ens, BackwardEnsemble::empty(ens));
    CHECK(std::fabs(cost.J - 1.0) <= 3.0 * cost.se);
  }
  // h == 0: the weighted cost equals the unweighted Monte Carlo cost.
  {
    const auto np = make_named_problem("quad_toy_noisy");
    TimeGrid g(16, 1.0);
    const auto noise = sample_noise(g, 500, 5);
    const auto pol = LinearFeaturePolicy::constant(
        ObservationFeatureMap::defaults(16), np.problem.control_set,
        std::vector<double>{0.4});
    const auto ens = simulate_forward(np.problem, pol, noise);
    const auto cost = eval_cost(np.problem, ens, BackwardEnsemble::empty(ens));
    double plain = 0.0;
    for (std::size_t i = 0; i < ens.paths; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < g.N; ++j)
        acc += np.problem.coeffs.l(g.node(j), ens.x_at(i, j), {}, {}, {},
                                   ens.u_at(i, j)) *
               g.dt;
      plain += acc;
    }
    plain /= static_cast<double>(ens.paths);
    CHECK(cost.J == doctest::Approx(plain).epsilon(1e-15));
  }
}
