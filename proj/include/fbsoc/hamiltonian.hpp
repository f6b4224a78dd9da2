#pragma once

#include <vector>

#include "fbsoc/errors.hpp"
#include "fbsoc/linalg.hpp"
#include "fbsoc/problem.hpp"

namespace fbsoc {

/// Arguments of the Hamiltonian
///   H = l + <b, p> + <sigma1, q1> + <sigma2, q2> + <f, k> + R2eff * h.
/// R2eff is the already-shifted scalar R2 - <sigma2, p> - <z2, k>; the
/// shift is applied by the caller exactly once (see shifted_R2) and H
/// treats it as an independent argument. Partial derivatives therefore
/// hold R2eff fixed.
struct HamiltonianPoint {
  double t = 0.0;
  Span x, y, z1, z2, u;
  Span p, q1, q2, k;
  double R2eff = 0.0;
};

inline double shifted_R2(double R2, Span sigma2_val, Span p, Span z2, Span k) {
  return R2 - dot(sigma2_val, p) - dot(z2, k);
}

inline double eval_H(const HamiltonianPoint& pt, const CoefficientSet& c) {
  double H = c.l(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u);
  H += dot(c.b(pt.t, pt.x, pt.u), pt.p);
  H += dot(c.sigma1(pt.t, pt.x, pt.u), pt.q1);
  H += dot(c.sigma2(pt.t, pt.x, pt.u), pt.q2);
  if (!pt.k.empty() && c.f) H += dot(c.f(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u), pt.k);
  H += pt.R2eff * c.h(pt.t, pt.x, pt.u);
  return H;
}

enum class Wrt { x, y, z1, z2, u };

namespace detail {
inline void require(bool present, const char* name) {
  if (!present) throw MissingPartial(std::string("grad_H: missing ") + name);
}
}  // namespace detail

/// Exact partial of H at the point; affine combination of the coefficient
/// partials. For wrt = z2 the shift inside R2eff is held fixed.
inline std::vector<double> grad_H(const HamiltonianPoint& pt,
                                  const CoefficientSet& c, Wrt wrt) {
  const std::size_t m = pt.y.size();
  switch (wrt) {
    case Wrt::x: {
      detail::require(bool(c.l_x), "l_x");
      detail::require(bool(c.b_x), "b_x");
      detail::require(bool(c.sigma1_x), "sigma1_x");
      detail::require(bool(c.sigma2_x), "sigma2_x");
      detail::require(bool(c.h_x), "h_x");
      const std::size_t n = pt.x.size();
      std::vector<double> g = c.l_x(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u);
      matTvec_acc(c.b_x(pt.t, pt.x, pt.u), n, n, pt.p, g);
      matTvec_acc(c.sigma1_x(pt.t, pt.x, pt.u), n, n, pt.q1, g);
      matTvec_acc(c.sigma2_x(pt.t, pt.x, pt.u), n, n, pt.q2, g);
      if (m > 0) {
        detail::require(bool(c.f_x), "f_x");
        matTvec_acc(c.f_x(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u), m, n, pt.k, g);
      }
      axpy(pt.R2eff, c.h_x(pt.t, pt.x, pt.u), g);
      return g;
    }
    case Wrt::u: {
      detail::require(bool(c.l_u), "l_u");
      detail::require(bool(c.b_u), "b_u");
      detail::require(bool(c.sigma1_u), "sigma1_u");
      detail::require(bool(c.sigma2_u), "sigma2_u");
      detail::require(bool(c.h_u), "h_u");
      const std::size_t n = pt.x.size(), k = pt.u.size();
      std::vector<double> g = c.l_u(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u);
      matTvec_acc(c.b_u(pt.t, pt.x, pt.u), n, k, pt.p, g);
      matTvec_acc(c.sigma1_u(pt.t, pt.x, pt.u), n, k, pt.q1, g);
      matTvec_acc(c.sigma2_u(pt.t, pt.x, pt.u), n, k, pt.q2, g);
      if (m > 0) {
        detail::require(bool(c.f_u), "f_u");
        matTvec_acc(c.f_u(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u), m, k, pt.k, g);
      }
      axpy(pt.R2eff, c.h_u(pt.t, pt.x, pt.u), g);
      return g;
    }
    case Wrt::y: {
      detail::require(bool(c.l_y), "l_y");
      std::vector<double> g = c.l_y(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u);
      if (m > 0) {
        detail::require(bool(c.f_y), "f_y");
        matTvec_acc(c.f_y(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u), m, m, pt.k, g);
      }
      return g;
    }
    case Wrt::z1: {
      detail::require(bool(c.l_z1), "l_z1");
      std::vector<double> g = c.l_z1(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u);
      if (m > 0) {
        detail::require(bool(c.f_z1), "f_z1");
        matTvec_acc(c.f_z1(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u), m, m, pt.k, g);
      }
      return g;
    }
    case Wrt::z2: {
      detail::require(bool(c.l_z2), "l_z2");
      std::vector<double> g = c.l_z2(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u);
      if (m > 0) {
        detail::require(bool(c.f_z2), "f_z2");
        matTvec_acc(c.f_z2(pt.t, pt.x, pt.y, pt.z1, pt.z2, pt.u), m, m, pt.k, g);
      }
      return g;
    }
  }
  return {};
}

}  // namespace fbsoc
