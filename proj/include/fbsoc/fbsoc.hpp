#pragma once

// Umbrella header: weak-formulation solver for partially observed optimal
// control of forward-backward stochastic systems, with Monte Carlo
// verification oracles.

#include "fbsoc/benchmark_lqg.hpp"
#include "fbsoc/bsde.hpp"
#include "fbsoc/config.hpp"
#include "fbsoc/control_set.hpp"
#include "fbsoc/errors.hpp"
#include "fbsoc/features.hpp"
#include "fbsoc/filter.hpp"
#include "fbsoc/grid.hpp"
#include "fbsoc/hamiltonian.hpp"
#include "fbsoc/linalg.hpp"
#include "fbsoc/optimize.hpp"
#include "fbsoc/policy.hpp"
#include "fbsoc/problem.hpp"
#include "fbsoc/registry.hpp"
#include "fbsoc/regression.hpp"
#include "fbsoc/report.hpp"
#include "fbsoc/rng.hpp"
#include "fbsoc/simulate.hpp"
#include "fbsoc/verify.hpp"
