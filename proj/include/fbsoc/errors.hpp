#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fbsoc {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An evaluator produced output of the wrong length, or a coefficient was
/// supplied/missing inconsistently with the declared dimensions.
struct DimensionMismatch : Error {
  using Error::Error;
};

/// An evaluator threw while being probed.
struct EvaluatorFailure : Error {
  using Error::Error;
};

/// A simulated quantity became NaN/Inf; carries the first offending cell.
struct NonFinite : Error {
  NonFinite(const std::string& what, std::size_t path, std::size_t step)
      : Error(what + " at path " + std::to_string(path) + ", step " +
              std::to_string(step)),
        path(path),
        step(step) {}
  std::size_t path;
  std::size_t step;
};

/// Normal equations numerically singular with no ridge to fall back on.
struct SingularRegression : Error {
  using Error::Error;
};

/// Bayes-ratio denominator needed flooring on too many paths.
struct DegenerateDensity : Error {
  using Error::Error;
};

/// A partial-derivative evaluator required by an operation is absent.
struct MissingPartial : Error {
  using Error::Error;
};

/// Half-space list defines an empty control set.
struct EmptySet : Error {
  using Error::Error;
};

/// Missing or malformed configuration key.
struct ConfigError : Error {
  using Error::Error;
};

/// Failure writing run artifacts.
struct IoError : Error {
  using Error::Error;
};

}  // namespace fbsoc
