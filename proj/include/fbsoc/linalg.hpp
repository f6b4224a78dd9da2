#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace fbsoc {

using Span = std::span<const double>;
using MutSpan = std::span<double>;

inline double dot(Span a, Span b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(Span a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, Span x, MutSpan y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

/// y += J * x, J row-major (rows x cols).
inline void matvec_acc(Span J, std::size_t rows, std::size_t cols, Span x,
                       MutSpan y) {
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += J[i * cols + j] * x[j];
    y[i] += s;
  }
}

/// y += J^T * x, J row-major (rows x cols); x has length rows, y length cols.
inline void matTvec_acc(Span J, std::size_t rows, std::size_t cols, Span x,
                        MutSpan y) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double xi = x[i];
    for (std::size_t j = 0; j < cols; ++j) y[j] += J[i * cols + j] * xi;
  }
}

inline bool all_finite(Span a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

struct MeanSe {
  double mean = 0.0;
  double se = std::numeric_limits<double>::quiet_NaN();
};

/// Sample mean and standard error of the mean. se is NaN for fewer than
/// two samples.
inline MeanSe mean_se(Span v) {
  MeanSe r;
  const std::size_t n = v.size();
  if (n == 0) {
    r.mean = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(n);
  r.mean = m;
  if (n < 2) return r;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  r.se = std::sqrt(ss / (static_cast<double>(n) * (static_cast<double>(n) - 1)));
  return r;
}

inline double sample_corr(Span a, Span b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// Slope of the least-squares line through (x_i, y_i).
inline double ls_slope(Span x, Span y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace fbsoc
