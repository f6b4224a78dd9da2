#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "fbsoc/control_set.hpp"
#include "fbsoc/features.hpp"
#include "fbsoc/grid.hpp"
#include "fbsoc/linalg.hpp"

namespace fbsoc {

/// An observation-adapted control policy. evaluate() must be a pure
/// function of (j, Y_0..Y_j) and return a value in U.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::size_t control_dim() const = 0;
  virtual std::vector<double> evaluate(const TimeGrid& grid, std::size_t j,
                                       Span y_prefix) const = 0;
};

/// u(t_j) = project_U(Theta * features_j) with Theta the k x F reshape of
/// the parameter vector theta.
class LinearFeaturePolicy final : public Policy {
 public:
  LinearFeaturePolicy(ObservationFeatureMap fmap, ControlSet control_set,
                      std::vector<double> theta)
      : fmap_(std::move(fmap)),
        uset_(std::move(control_set)),
        theta_(std::move(theta)) {
    if (theta_.size() != uset_.dim() * fmap_.count())
      throw Error("LinearFeaturePolicy: theta length != k * feature count");
  }

  static LinearFeaturePolicy zero(ObservationFeatureMap fmap,
                                  ControlSet control_set) {
    const std::size_t len = control_set.dim() * fmap.count();
    return LinearFeaturePolicy(std::move(fmap), std::move(control_set),
                               std::vector<double>(len, 0.0));
  }

  /// Policy emitting the constant control u0 (before projection).
  static LinearFeaturePolicy constant(ObservationFeatureMap fmap,
                                      ControlSet control_set, Span u0) {
    const std::size_t F = fmap.count();
    std::vector<double> theta(control_set.dim() * F, 0.0);
    for (std::size_t c = 0; c < control_set.dim(); ++c)
      theta[c * F + fmap.constant_index()] = u0[c];
    return LinearFeaturePolicy(std::move(fmap), std::move(control_set),
                               std::move(theta));
  }

  std::size_t control_dim() const override { return uset_.dim(); }
  std::size_t param_count() const { return theta_.size(); }
  const std::vector<double>& theta() const { return theta_; }
  std::vector<double>& theta() { return theta_; }
  const ObservationFeatureMap& feature_map() const { return fmap_; }
  const ControlSet& control_set() const { return uset_; }

  std::vector<double> evaluate(const TimeGrid& grid, std::size_t j,
                               Span y_prefix) const override {
    const std::size_t k = uset_.dim(), F = fmap_.count();
    std::vector<double> feat(F);
    fmap_.eval(grid, j, y_prefix, feat);
    std::vector<double> u(k, 0.0);
    for (std::size_t c = 0; c < k; ++c)
      u[c] = dot(Span(theta_).subspan(c * F, F), feat);
    uset_.project_in_place(u);
    return u;
  }

  /// Exact Jacobian du/dtheta (k rows, k*F columns, row-major) of the
  /// projected affine map. Clamped box coordinates get zero rows.
  std::vector<double> jacobian(const TimeGrid& grid, std::size_t j,
                               Span y_prefix) const {
    const std::size_t k = uset_.dim(), F = fmap_.count();
    std::vector<double> feat(F);
    fmap_.eval(grid, j, y_prefix, feat);
    std::vector<double> raw(k, 0.0);
    for (std::size_t c = 0; c < k; ++c)
      raw[c] = dot(Span(theta_).subspan(c * F, F), feat);
    const std::vector<double> PJ = uset_.projection_jacobian(raw);
    std::vector<double> J(k * k * F, 0.0);
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t cc = 0; cc < k; ++cc) {
        const double w = PJ[c * k + cc];
        if (w == 0.0) continue;
        for (std::size_t f = 0; f < F; ++f)
          J[c * (k * F) + cc * F + f] = w * feat[f];
      }
    return J;
  }

 private:
  ObservationFeatureMap fmap_;
  ControlSet uset_;
  std::vector<double> theta_;
};

/// The perturbed control u_a + eps * (u_b - u_a). For eps in [0, 1] the
/// value lies in U by convexity; it is projected anyway as a guard.
class BlendPolicy final : public Policy {
 public:
  BlendPolicy(const Policy& a, const Policy& b, double eps,
              const ControlSet& uset)
      : a_(a), b_(b), eps_(eps), uset_(uset) {}

  std::size_t control_dim() const override { return a_.control_dim(); }

  std::vector<double> evaluate(const TimeGrid& grid, std::size_t j,
                               Span y_prefix) const override {
    std::vector<double> ua = a_.evaluate(grid, j, y_prefix);
    const std::vector<double> ub = b_.evaluate(grid, j, y_prefix);
    for (std::size_t c = 0; c < ua.size(); ++c)
      ua[c] += eps_ * (ub[c] - ua[c]);
    uset_.project_in_place(ua);
    return ua;
  }

 private:
  const Policy& a_;
  const Policy& b_;
  double eps_;
  const ControlSet& uset_;
};

}  // namespace fbsoc
