#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fbsoc/control_set.hpp"
#include "fbsoc/errors.hpp"
#include "fbsoc/linalg.hpp"
#include "fbsoc/rng.hpp"

namespace fbsoc {

/// Problem dimensions: state x in R^n, backward triple (y, z1, z2) in R^m,
/// control u in U subset of R^k, horizon T. m = 0 means the backward
/// component (and f, phi, gamma) is absent.
struct Dimensions {
  std::size_t n = 1;
  std::size_t m = 0;
  std::size_t k = 1;
  double T = 1.0;
};

using FwdFn = std::function<std::vector<double>(double t, Span x, Span u)>;
using FwdSFn = std::function<double(double t, Span x, Span u)>;
using DrvFn = std::function<std::vector<double>(double t, Span x, Span y,
                                                Span z1, Span z2, Span u)>;
using DrvSFn =
    std::function<double(double t, Span x, Span y, Span z1, Span z2, Span u)>;
using MapFn = std::function<std::vector<double>(Span v)>;
using MapSFn = std::function<double(Span v)>;

/// Coefficient functions of the controlled system and cost, with their
/// partial derivatives. Jacobians are row-major: b_x is n x n with entry
/// (i, j) = d b_i / d x_j, f_u is m x k, phi_x is m x n, and so on.
/// Evaluators must be pure; they are called concurrently.
struct CoefficientSet {
  FwdFn b, sigma1, sigma2;        // -> R^n
  FwdSFn h;                       // -> R
  DrvFn f;                        // -> R^m   (empty when m == 0)
  MapFn phi;                      // x -> R^m (empty when m == 0)
  DrvSFn l;                       // running cost
  MapSFn Phi;                     // terminal cost of x
  MapSFn gamma;                   // initial cost of y(0) (empty when m == 0)

  FwdFn b_x, b_u;                 // n x n, n x k
  FwdFn sigma1_x, sigma1_u;       // n x n, n x k
  FwdFn sigma2_x, sigma2_u;       // n x n, n x k
  FwdFn h_x, h_u;                 // n, k
  DrvFn f_x, f_y, f_z1, f_z2, f_u;  // m x n, m x m, m x m, m x m, m x k
  MapFn phi_x;                    // m x n
  DrvFn l_x, l_y, l_z1, l_z2, l_u;  // n, m, m, m, k
  MapFn Phi_x;                    // n
  MapFn gamma_y;                  // m

  std::vector<double> x0;
  /// Declared bound for |sigma2| and |h|; 0 means not declared.
  /// Spot-checked at build, never verified globally.
  double bound_C = 0.0;
};

/// A validated control problem instance.
struct ProblemInstance {
  Dimensions dims;
  CoefficientSet coeffs;
  ControlSet control_set;
  std::string label;
};

namespace detail {

inline void expect_len(const std::vector<double>& v, std::size_t want,
                       const char* name) {
  if (v.size() != want)
    throw DimensionMismatch(std::string(name) + ": expected length " +
                            std::to_string(want) + ", got " +
                            std::to_string(v.size()));
}

template <class Fn, class... Args>
auto probe_call(const char* name, const Fn& fn, Args&&... args) {
  try {
    return fn(std::forward<Args>(args)...);
  } catch (const DimensionMismatch&) {
    throw;
  } catch (const std::exception& e) {
    throw EvaluatorFailure(std::string(name) + " raised at probe point: " +
                           e.what());
  }
}

}  // namespace detail

/// Validates dimensions and evaluators by probing every supplied function
/// once at (t = 0, x = x0, y = 0, z = 0, u = project(0)).
inline ProblemInstance build_problem(const Dimensions& dims,
                                     CoefficientSet coeffs,
                                     ControlSet control_set,
                                     std::string label = "problem") {
  if (dims.n < 1) throw DimensionMismatch("n must be >= 1");
  if (dims.k < 1) throw DimensionMismatch("k must be >= 1");
  if (!(dims.T > 0)) throw DimensionMismatch("T must be positive");
  if (control_set.dim() != dims.k)
    throw DimensionMismatch("control set dimension does not match k");
  detail::expect_len(coeffs.x0, dims.n, "x0");

  const std::size_t n = dims.n, m = dims.m, k = dims.k;
  const std::vector<double> x = coeffs.x0;
  const std::vector<double> y(m, 0.0), z(m, 0.0);
  const std::vector<double> u = control_set.project(std::vector<double>(k, 0.0));
  const double t = 0.0;

  auto need = [](bool present, const char* name) {
    if (!present)
      throw EvaluatorFailure(std::string("missing evaluator: ") + name);
  };
  need(bool(coeffs.b), "b");
  need(bool(coeffs.sigma1), "sigma1");
  need(bool(coeffs.sigma2), "sigma2");
  need(bool(coeffs.h), "h");
  need(bool(coeffs.l), "l");
  need(bool(coeffs.Phi), "Phi");

  if (m == 0) {
    if (coeffs.f || coeffs.phi || coeffs.gamma || coeffs.f_x || coeffs.f_y ||
        coeffs.f_z1 || coeffs.f_z2 || coeffs.f_u || coeffs.phi_x ||
        coeffs.gamma_y || coeffs.l_y || coeffs.l_z1 || coeffs.l_z2)
      throw DimensionMismatch(
          "m = 0 but a backward-component evaluator was supplied");
  } else {
    need(bool(coeffs.f), "f");
    need(bool(coeffs.phi), "phi");
    need(bool(coeffs.gamma), "gamma");
  }

  auto probe_fwd = [&](const FwdFn& fn, std::size_t len, const char* name) {
    if (fn) detail::expect_len(detail::probe_call(name, fn, t, x, u), len, name);
  };
  auto probe_drv = [&](const DrvFn& fn, std::size_t len, const char* name) {
    if (fn)
      detail::expect_len(detail::probe_call(name, fn, t, x, y, z, z, u), len,
                         name);
  };
  auto probe_map = [&](const MapFn& fn, Span at, std::size_t len,
                       const char* name) {
    if (fn)
      detail::expect_len(
          detail::probe_call(name, fn, std::vector<double>(at.begin(), at.end())),
          len, name);
  };

  probe_fwd(coeffs.b, n, "b");
  probe_fwd(coeffs.sigma1, n, "sigma1");
  probe_fwd(coeffs.sigma2, n, "sigma2");
  (void)detail::probe_call("h", coeffs.h, t, x, u);
  probe_fwd(coeffs.b_x, n * n, "b_x");
  probe_fwd(coeffs.b_u, n * k, "b_u");
  probe_fwd(coeffs.sigma1_x, n * n, "sigma1_x");
  probe_fwd(coeffs.sigma1_u, n * k, "sigma1_u");
  probe_fwd(coeffs.sigma2_x, n * n, "sigma2_x");
  probe_fwd(coeffs.sigma2_u, n * k, "sigma2_u");
  probe_fwd(coeffs.h_x, n, "h_x");
  probe_fwd(coeffs.h_u, k, "h_u");

  (void)detail::probe_call("l", coeffs.l, t, x, y, z, z, u);
  probe_drv(coeffs.l_x, n, "l_x");
  probe_drv(coeffs.l_u, k, "l_u");
  probe_map(coeffs.Phi_x, x, n, "Phi_x");

  if (m >= 1) {
    probe_drv(coeffs.f, m, "f");
    probe_drv(coeffs.f_x, m * n, "f_x");
    probe_drv(coeffs.f_y, m * m, "f_y");
    probe_drv(coeffs.f_z1, m * m, "f_z1");
    probe_drv(coeffs.f_z2, m * m, "f_z2");
    probe_drv(coeffs.f_u, m * k, "f_u");
    probe_drv(coeffs.l_y, m, "l_y");
    probe_drv(coeffs.l_z1, m, "l_z1");
    probe_drv(coeffs.l_z2, m, "l_z2");
    probe_map(coeffs.phi, x, m, "phi");
    probe_map(coeffs.phi_x, x, m * n, "phi_x");
    probe_map(coeffs.gamma_y, y, m, "gamma_y");
    (void)detail::probe_call("gamma", coeffs.gamma, y);
  }

  if (coeffs.bound_C > 0.0) {
    // Spot-check the declared sigma2/h bound on a few sampled points.
    RngStream rs(0x5eedf00dULL);
    for (int s = 0; s < 32; ++s) {
      std::vector<double> xs(n);
      for (auto& v : xs) v = rs.normal();
      std::vector<double> us(k);
      const auto [ulo, uhi] = control_set.interior_box();
      for (std::size_t i = 0; i < k; ++i) us[i] = rs.uniform(ulo[i], uhi[i]);
      const double ts = rs.uniform(0.0, dims.T);
      const auto s2 = coeffs.sigma2(ts, xs, us);
      const double hv = coeffs.h(ts, xs, us);
      if (norm2(s2) > coeffs.bound_C || std::fabs(hv) > coeffs.bound_C)
        throw EvaluatorFailure(
            "declared bound C violated by sigma2 or h at a sampled point");
    }
  }

  return ProblemInstance{dims, std::move(coeffs), std::move(control_set),
                         std::move(label)};
}

struct PartialCheck {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradientCheckReport {
  std::vector<PartialCheck> partials;
  bool all_pass = true;
  double worst() const {
    double w = 0.0;
    for (const auto& p : partials) w = std::max(w, p.max_rel_err);
    return w;
  }
};

/// Compares every supplied partial-derivative evaluator against central
/// finite differences of its base function at sampled points. Failures are
/// report entries, never exceptions.
inline GradientCheckReport check_gradients(const ProblemInstance& p,
                                           std::size_t samples, double step,
                                           double tol, std::uint64_t seed) {
  const std::size_t n = p.dims.n, m = p.dims.m, k = p.dims.k;
  GradientCheckReport report;
  RngStream rs(seed);
  const auto [ulo, uhi] = p.control_set.interior_box();

  struct Point {
    double t;
    std::vector<double> x, y, z1, z2, u;
  };
  std::vector<Point> pts(std::max<std::size_t>(samples, 1));
  for (auto& pt : pts) {
    pt.t = rs.uniform(0.0, p.dims.T);
    pt.x.resize(n);
    for (auto& v : pt.x) v = rs.normal();
    pt.y.resize(m);
    for (auto& v : pt.y) v = rs.normal();
    pt.z1.resize(m);
    for (auto& v : pt.z1) v = rs.normal();
    pt.z2.resize(m);
    for (auto& v : pt.z2) v = rs.normal();
    pt.u.resize(k);
    for (std::size_t i = 0; i < k; ++i) pt.u[i] = rs.uniform(ulo[i], uhi[i]);
  }

  auto record = [&](const std::string& name, double err) {
    report.partials.push_back({name, err, err <= tol});
    if (err > tol) report.all_pass = false;
  };
  auto rel = [](double analytic, double fd) {
    return std::fabs(analytic - fd) / std::max(1.0, std::fabs(analytic));
  };

  // Generic engine: evaluate base as a flat vector, bump one coordinate of
  // one argument, compare the column of the Jacobian.
  auto check = [&](const std::string& name, std::size_t rows, std::size_t cols,
                   auto&& base_flat, auto&& jac_flat, auto&& bump) {
    double worst = 0.0;
    for (auto& pt : pts) {
      const std::vector<double> J = jac_flat(pt);
      for (std::size_t j = 0; j < cols; ++j) {
        const std::vector<double> fp = base_flat(bump(pt, j, +step));
        const std::vector<double> fm = base_flat(bump(pt, j, -step));
        for (std::size_t i = 0; i < rows; ++i) {
          const double fd = (fp[i] - fm[i]) / (2.0 * step);
          worst = std::max(worst, rel(J[i * cols + j], fd));
        }
      }
    }
    record(name, worst);
  };

  enum Arg { ArgX, ArgY, ArgZ1, ArgZ2, ArgU };
  auto bump_arg = [](Point pt, Arg a, std::size_t j, double d) {
    switch (a) {
      case ArgX: pt.x[j] += d; break;
      case ArgY: pt.y[j] += d; break;
      case ArgZ1: pt.z1[j] += d; break;
      case ArgZ2: pt.z2[j] += d; break;
      case ArgU: pt.u[j] += d; break;
    }
    return pt;
  };

  const auto& c = p.coeffs;
  auto fwd_flat = [&](const FwdFn& fn) {
    return [&fn](const Point& pt) { return fn(pt.t, pt.x, pt.u); };
  };
  auto fwds_flat = [&](const FwdSFn& fn) {
    return [&fn](const Point& pt) {
      return std::vector<double>{fn(pt.t, pt.x, pt.u)};
    };
  };
  auto drv_flat = [&](const DrvFn& fn) {
    return [&fn](const Point& pt) {
      return fn(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u);
    };
  };
  auto drvs_flat = [&](const DrvSFn& fn) {
    return [&fn](const Point& pt) {
      return std::vector<double>{fn(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u)};
    };
  };

  auto check_fwd = [&](const char* nm, const FwdFn& base, const FwdFn& part,
                       std::size_t rows, Arg a, std::size_t cols) {
    if (!part) return;
    check(nm, rows, cols, fwd_flat(base), [&](const Point& pt) {
            return part(pt.t, pt.x, pt.u);
          },
          [&](const Point& pt, std::size_t j, double d) {
            return bump_arg(pt, a, j, d);
          });
  };
  check_fwd("b_x", c.b, c.b_x, n, ArgX, n);
  check_fwd("b_u", c.b, c.b_u, n, ArgU, k);
  check_fwd("sigma1_x", c.sigma1, c.sigma1_x, n, ArgX, n);
  check_fwd("sigma1_u", c.sigma1, c.sigma1_u, n, ArgU, k);
  check_fwd("sigma2_x", c.sigma2, c.sigma2_x, n, ArgX, n);
  check_fwd("sigma2_u", c.sigma2, c.sigma2_u, n, ArgU, k);

  auto check_fwds = [&](const char* nm, const FwdSFn& base, const FwdFn& part,
                        Arg a, std::size_t cols) {
    if (!part) return;
    check(nm, 1, cols, fwds_flat(base), [&](const Point& pt) {
            return part(pt.t, pt.x, pt.u);
          },
          [&](const Point& pt, std::size_t j, double d) {
            return bump_arg(pt, a, j, d);
          });
  };
  check_fwds("h_x", c.h, c.h_x, ArgX, n);
  check_fwds("h_u", c.h, c.h_u, ArgU, k);

  auto check_drv = [&](const char* nm, const DrvFn& base, const DrvFn& part,
                       std::size_t rows, Arg a, std::size_t cols) {
    if (!part || !base) return;
    check(nm, rows, cols, drv_flat(base), [&](const Point& pt) {
            return part(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u);
          },
          [&](const Point& pt, std::size_t j, double d) {
            return bump_arg(pt, a, j, d);
          });
  };
  check_drv("f_x", c.f, c.f_x, m, ArgX, n);
  check_drv("f_y", c.f, c.f_y, m, ArgY, m);
  check_drv("f_z1", c.f, c.f_z1, m, ArgZ1, m);
  check_drv("f_z2", c.f, c.f_z2, m, ArgZ2, m);
  check_drv("f_u", c.f, c.f_u, m, ArgU, k);

  auto check_drvs = [&](const char* nm, const DrvSFn& base, const DrvFn& part,
                        Arg a, std::size_t cols) {
    if (!part) return;
    check(nm, 1, cols, drvs_flat(base), [&](const Point& pt) {
            return part(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u);
          },
          [&](const Point& pt, std::size_t j, double d) {
            return bump_arg(pt, a, j, d);
          });
  };
  check_drvs("l_x", c.l, c.l_x, ArgX, n);
  check_drvs("l_y", c.l, c.l_y, ArgY, m);
  check_drvs("l_z1", c.l, c.l_z1, ArgZ1, m);
  check_drvs("l_z2", c.l, c.l_z2, ArgZ2, m);
  check_drvs("l_u", c.l, c.l_u, ArgU, k);

  auto check_map = [&](const char* nm, const MapFn& base, const MapFn& part,
                       std::size_t rows, std::size_t cols, bool on_y) {
    if (!part || !base) return;
    double worst = 0.0;
    for (auto& pt : pts) {
      const std::vector<double>& v0 = on_y ? pt.y : pt.x;
      const std::vector<double> J = part(v0);
      for (std::size_t j = 0; j < cols; ++j) {
        std::vector<double> vp(v0), vm(v0);
        vp[j] += step;
        vm[j] -= step;
        const auto fp = base(vp);
        const auto fm = base(vm);
        for (std::size_t i = 0; i < rows; ++i)
          worst = std::max(worst, rel(J[i * cols + j],
                                      (fp[i] - fm[i]) / (2.0 * step)));
      }
    }
    record(nm, worst);
  };
  check_map("phi_x", c.phi, c.phi_x, m, n, false);
  auto scalar_as_map = [](const MapSFn& fn) {
    return [&fn](Span v) {
      return std::vector<double>{
          fn(std::vector<double>(v.begin(), v.end()))};
    };
  };
  if (c.Phi_x)
    check_map("Phi_x", scalar_as_map(c.Phi), c.Phi_x, 1, n, false);
  if (c.gamma_y && c.gamma)
    check_map("gamma_y", scalar_as_map(c.gamma), c.gamma_y, 1, m, true);

  return report;
}

/// Euclidean projection onto the control set.
inline std::vector<double> project_control(const ControlSet& cs, Span v) {
  if (!all_finite(v)) throw Error("project_control: non-finite input");
  return cs.project(v);
}

}  // namespace fbsoc
