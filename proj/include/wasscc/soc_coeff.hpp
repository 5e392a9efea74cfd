#pragma once

#include <vector>

#include "wasscc/common.hpp"

namespace wasscc {

// Result of the one-dimensional search defining a cone coefficient.
struct CoeffResult {
  double c;                // the coefficient itself
  double argopt_eps_prime; // optimizing inner level eps'
  int iterations;          // unimodal-search iterations spent
  double residual;         // |stationarity equation| at the optimizer
};

// Pessimistic cone coefficient for a Gaussian reference:
//   c_p = inf_{eps' in (0, eps)}
//           (delta + pe(z_{1-eps}) - pe(z_{1-eps'})) / (eps - eps'),
// with pe(t) = upper_partial_expectation(t) and z_q the standard normal
// quantile.  The quotient is quasiconvex in eps', so golden-section search
// followed by bisection on the derivative sign locates the global infimum.
// Requires eps <= 1/2 and delta > 0.  Always >= z_{1-eps}, decreasing to it
// as delta -> 0.
CoeffResult c_pess(ProbLevel eps, double delta);

// Optimistic counterpart:
//   c_o = sup_{eps' in (eps, 1)}
//           (-delta + pe(z_{eps'}) - pe(z_eps)) / (eps' - eps).
// Valid for any eps in (0,1) and delta > 0.  Always <= z_{1-eps}; turns
// negative once delta crosses the watershed radius below.
CoeffResult c_opt(ProbLevel eps, double delta);

// The radius at which c_o(eps, delta) hits zero.
struct WatershedPoint {
  double eps;
  double delta_star;
};

// Watershed radius delta*(eps) = pdf(0) - pdf(z_eps), the exact root of
// c_opt(eps, .) = 0 for eps < 1/2.  The closed form is cross-checked
// against root-finding on c_opt; a discrepancy beyond 1e-6 throws.
WatershedPoint watershed(ProbLevel eps);

// Pointwise watershed over a strictly increasing grid inside (0, 1/2).
std::vector<WatershedPoint> watershed_sweep(const std::vector<ProbLevel>& eps_grid);

}  // namespace wasscc
