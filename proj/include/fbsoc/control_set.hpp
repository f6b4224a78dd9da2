#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "fbsoc/errors.hpp"
#include "fbsoc/linalg.hpp"

namespace fbsoc {

/// A half-space { v : <normal, v> <= offset }.
struct HalfSpace {
  std::vector<double> normal;
  double offset;
};

/// Nonempty convex control set U in R^k with Euclidean projection.
/// Three kinds: coordinate box, ball, and intersection of half-spaces.
class ControlSet {
 public:
  enum class Kind { Box, Ball, HalfSpaces };

  static ControlSet box(std::vector<double> lo, std::vector<double> hi) {
    if (lo.size() != hi.size() || lo.empty())
      throw Error("ControlSet::box: bound size mismatch");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i])) throw EmptySet("ControlSet::box: lo > hi");
    ControlSet s;
    s.kind_ = Kind::Box;
    s.dim_ = lo.size();
    s.lo_ = std::move(lo);
    s.hi_ = std::move(hi);
    return s;
  }

  /// Symmetric box [-r, r]^k.
  static ControlSet symmetric_box(std::size_t k, double r) {
    return box(std::vector<double>(k, -r), std::vector<double>(k, r));
  }

  static ControlSet ball(std::vector<double> center, double radius) {
    if (center.empty() || !(radius > 0.0))
      throw Error("ControlSet::ball: bad parameters");
    ControlSet s;
    s.kind_ = Kind::Ball;
    s.dim_ = center.size();
    s.center_ = std::move(center);
    s.radius_ = radius;
    return s;
  }

  /// Intersection of half-spaces. Feasibility is probed at construction by
  /// alternating projections; an unreachable tolerance means the list is
  /// inconsistent.
  static ControlSet half_spaces(std::size_t k, std::vector<HalfSpace> hs) {
    ControlSet s;
    s.kind_ = Kind::HalfSpaces;
    s.dim_ = k;
    for (const auto& h : hs)
      if (h.normal.size() != k || norm2(h.normal) == 0.0)
        throw Error("ControlSet::half_spaces: bad normal");
    s.half_spaces_ = std::move(hs);
    std::vector<double> probe(k, 0.0);
    std::vector<double> proj = s.project(probe);
    if (!s.contains(proj, 1e-8))
      throw EmptySet("ControlSet::half_spaces: inconsistent constraint list");
    return s;
  }

  std::size_t dim() const { return dim_; }
  Kind kind() const { return kind_; }

  std::vector<double> project(Span v) const {
    std::vector<double> out(v.begin(), v.end());
    project_in_place(out);
    return out;
  }

  void project_in_place(std::vector<double>& v) const {
    switch (kind_) {
      case Kind::Box:
        for (std::size_t i = 0; i < dim_; ++i)
          v[i] = std::clamp(v[i], lo_[i], hi_[i]);
        break;
      case Kind::Ball: {
        double d2 = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
          const double w = v[i] - center_[i];
          d2 += w * w;
        }
        if (d2 > radius_ * radius_) {
          const double scale = radius_ / std::sqrt(d2);
          for (std::size_t i = 0; i < dim_; ++i)
            v[i] = center_[i] + scale * (v[i] - center_[i]);
        }
        break;
      }
      case Kind::HalfSpaces:
        dykstra(v);
        break;
    }
  }

  bool contains(Span v, double tol = 0.0) const {
    switch (kind_) {
      case Kind::Box:
        for (std::size_t i = 0; i < dim_; ++i)
          if (v[i] < lo_[i] - tol || v[i] > hi_[i] + tol) return false;
        return true;
      case Kind::Ball: {
        double d2 = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
          const double w = v[i] - center_[i];
          d2 += w * w;
        }
        return std::sqrt(d2) <= radius_ + tol;
      }
      case Kind::HalfSpaces:
        for (const auto& h : half_spaces_) {
          const double slack = dot(h.normal, v) - h.offset;
          if (slack > tol * (1.0 + std::fabs(h.offset))) return false;
        }
        return true;
    }
    return false;
  }

  /// Jacobian of the projection map at v (k x k row-major). Box coordinates
  /// at or beyond their bound get a zero row; the ball uses the exact
  /// derivative of radial scaling; half-space intersections fall back to
  /// central differences.
  std::vector<double> projection_jacobian(Span v) const {
    std::vector<double> J(dim_ * dim_, 0.0);
    switch (kind_) {
      case Kind::Box:
        for (std::size_t i = 0; i < dim_; ++i)
          if (v[i] > lo_[i] && v[i] < hi_[i]) J[i * dim_ + i] = 1.0;
        break;
      case Kind::Ball: {
        std::vector<double> w(dim_);
        double d2 = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
          w[i] = v[i] - center_[i];
          d2 += w[i] * w[i];
        }
        if (d2 <= radius_ * radius_) {
          for (std::size_t i = 0; i < dim_; ++i) J[i * dim_ + i] = 1.0;
        } else {
          const double d = std::sqrt(d2);
          for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j)
              J[i * dim_ + j] =
                  radius_ / d * ((i == j ? 1.0 : 0.0) - w[i] * w[j] / d2);
        }
        break;
      }
      case Kind::HalfSpaces: {
        const double eps = 1e-6;
        std::vector<double> vp(v.begin(), v.end()), vm(v.begin(), v.end());
        for (std::size_t j = 0; j < dim_; ++j) {
          vp[j] += eps;
          vm[j] -= eps;
          const auto pp = project(vp);
          const auto pm = project(vm);
          for (std::size_t i = 0; i < dim_; ++i)
            J[i * dim_ + j] = (pp[i] - pm[i]) / (2.0 * eps);
          vp[j] = v[j];
          vm[j] = v[j];
        }
        break;
      }
    }
    return J;
  }

  /// A box strictly inside U, used by sampling-based checks.
  std::pair<std::vector<double>, std::vector<double>> interior_box() const {
    switch (kind_) {
      case Kind::Box: {
        std::vector<double> lo(dim_), hi(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
          const double c = 0.5 * (lo_[i] + hi_[i]);
          const double r = 0.45 * (hi_[i] - lo_[i]);
          lo[i] = c - r;
          hi[i] = c + r;
        }
        return {lo, hi};
      }
      case Kind::Ball: {
        const double r = 0.9 * radius_ / std::sqrt(static_cast<double>(dim_));
        std::vector<double> lo(dim_), hi(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
          lo[i] = center_[i] - r;
          hi[i] = center_[i] + r;
        }
        return {lo, hi};
      }
      case Kind::HalfSpaces: {
        std::vector<double> c = project(std::vector<double>(dim_, 0.0));
        double r = 1.0;
        auto corners_inside = [&](double rad) {
          // Probe the 2^k corners; k is small for every shipped set.
          const std::size_t corners = std::size_t{1} << dim_;
          for (std::size_t mask = 0; mask < corners; ++mask) {
            std::vector<double> v(c);
            for (std::size_t i = 0; i < dim_; ++i)
              v[i] += (mask >> i & 1) ? rad : -rad;
            if (!contains(v, 1e-12)) return false;
          }
          return true;
        };
        while (r > 1e-10 && !corners_inside(r)) r *= 0.5;
        std::vector<double> lo(dim_), hi(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
          lo[i] = c[i] - r;
          hi[i] = c[i] + r;
        }
        return {lo, hi};
      }
    }
    return {{}, {}};
  }

 private:
  void dykstra(std::vector<double>& v) const {
    // Dykstra's alternating projections onto the half-space list.
    const std::size_t m = half_spaces_.size();
    std::vector<std::vector<double>> corr(m, std::vector<double>(dim_, 0.0));
    std::vector<double> prev(dim_);
    for (int iter = 0; iter < 1000; ++iter) {
      prev = v;
      for (std::size_t c = 0; c < m; ++c) {
        const auto& h = half_spaces_[c];
        std::vector<double> w(dim_);
        for (std::size_t i = 0; i < dim_; ++i) w[i] = v[i] + corr[c][i];
        const double nn = dot(h.normal, h.normal);
        const double viol = dot(h.normal, w) - h.offset;
        std::vector<double> proj(w);
        if (viol > 0.0)
          for (std::size_t i = 0; i < dim_; ++i)
            proj[i] -= viol / nn * h.normal[i];
        for (std::size_t i = 0; i < dim_; ++i) {
          corr[c][i] = w[i] - proj[i];
          v[i] = proj[i];
        }
      }
      double delta = 0.0;
      for (std::size_t i = 0; i < dim_; ++i)
        delta = std::max(delta, std::fabs(v[i] - prev[i]));
      if (delta < 1e-14) break;
    }
  }

  Kind kind_ = Kind::Box;
  std::size_t dim_ = 0;
  std::vector<double> lo_, hi_;
  std::vector<double> center_;
  double radius_ = 0.0;
  std::vector<HalfSpace> half_spaces_;
};

}  // namespace fbsoc
