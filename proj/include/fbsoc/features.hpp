#pragma once

#include <cstddef>
#include <vector>

#include "fbsoc/errors.hpp"
#include "fbsoc/grid.hpp"
#include "fbsoc/linalg.hpp"

namespace fbsoc {

/// Observation-adapted feature map: polynomials of (t_j, Y_j, lagged Y
/// values) up to a total degree. Features at step j depend only on
/// Y_0..Y_j, which is what makes everything built on them F^Y-adapted.
class ObservationFeatureMap {
 public:
  ObservationFeatureMap(std::vector<std::size_t> lag_offsets, int degree)
      : offsets_(std::move(lag_offsets)), degree_(degree) {
    if (degree_ < 0) throw Error("ObservationFeatureMap: negative degree");
    if (!offsets_.empty() && offsets_.front() < 1)
      throw Error("ObservationFeatureMap: lag offsets start at 1");
    for (std::size_t i = 1; i < offsets_.size(); ++i)
      if (offsets_[i] <= offsets_[i - 1])
        throw Error("ObservationFeatureMap: offsets must be increasing");
    vars_ = 2 + offsets_.size();  // t, Y_j, lags
    std::vector<int> exp(vars_, 0);
    enumerate(exp, 0, degree_);
  }

  /// Defaults used across the library: two lags {1, ceil(N/8)}, degree 2.
  static ObservationFeatureMap defaults(std::size_t grid_steps) {
    const std::size_t far = std::max<std::size_t>(2, (grid_steps + 7) / 8);
    return ObservationFeatureMap({1, far}, 2);
  }

  std::size_t count() const { return exponents_.size() / vars_; }
  std::size_t variable_count() const { return vars_; }
  int degree() const { return degree_; }
  const std::vector<std::size_t>& lag_offsets() const { return offsets_; }

  /// Exponent of variable v in feature f.
  int exponent(std::size_t f, std::size_t v) const {
    return exponents_[f * vars_ + v];
  }

  /// Features that carry no power of t. At a fixed step these span the
  /// same space as the full set (t is constant there), so per-step
  /// regressions use this subset to keep the design matrix well posed.
  std::vector<std::size_t> t_free_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t f = 0; f < count(); ++f)
      if (exponent(f, 0) == 0) idx.push_back(f);
    return idx;
  }

  /// Writes all features at step j given the observation prefix Y_0..Y_j.
  void eval(const TimeGrid& grid, std::size_t j, Span y_prefix,
            MutSpan out) const {
    std::vector<double> v(vars_);
    v[0] = grid.node(j);
    v[1] = y_prefix[j];
    for (std::size_t q = 0; q < offsets_.size(); ++q) {
      const std::size_t lag = offsets_[q];
      v[2 + q] = y_prefix[j >= lag ? j - lag : 0];
    }
    for (std::size_t f = 0; f < count(); ++f) {
      double prod = 1.0;
      for (std::size_t q = 0; q < vars_; ++q) {
        const int e = exponents_[f * vars_ + q];
        for (int r = 0; r < e; ++r) prod *= v[q];
      }
      out[f] = prod;
    }
  }

  std::vector<double> eval(const TimeGrid& grid, std::size_t j,
                           Span y_prefix) const {
    std::vector<double> out(count());
    eval(grid, j, y_prefix, out);
    return out;
  }

  /// Index of the constant feature (all exponents zero).
  std::size_t constant_index() const { return 0; }

 private:
  void enumerate(std::vector<int>& exp, std::size_t var, int budget) {
    if (var == vars_) {
      exponents_.insert(exponents_.end(), exp.begin(), exp.end());
      return;
    }
    for (int e = 0; e <= budget; ++e) {
      exp[var] = e;
      enumerate(exp, var + 1, budget - e);
    }
    exp[var] = 0;
  }

  std::vector<std::size_t> offsets_;
  int degree_;
  std::size_t vars_;
  std::vector<int> exponents_;  // count x vars, row-major
};

}  // namespace fbsoc
