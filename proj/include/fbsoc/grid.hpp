#pragma once

#include <cstddef>
#include <stdexcept>

#include "fbsoc/errors.hpp"

namespace fbsoc {

/// Uniform time grid on [0, T] with N steps. The last node is T exactly,
/// not an accumulated N*dt.
struct TimeGrid {
  TimeGrid() : N(1), T(1.0), dt(1.0) {}
  TimeGrid(std::size_t steps, double horizon) : N(steps), T(horizon) {
    if (steps < 1) throw Error("TimeGrid: need at least one step");
    if (!(horizon > 0.0)) throw Error("TimeGrid: horizon must be positive");
    dt = T / static_cast<double>(N);
  }

  double node(std::size_t j) const {
    return j == N ? T : static_cast<double>(j) * dt;
  }

  std::size_t N;
  double T;
  double dt;
};

}  // namespace fbsoc
