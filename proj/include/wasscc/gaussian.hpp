#pragma once

#include "wasscc/common.hpp"

namespace wasscc {

// Standard normal density (2*pi)^{-1/2} * exp(-z^2/2).
double std_pdf(double z);

// Standard normal CDF, computed as 0.5*erfc(-z/sqrt(2)).  The C library
// erfc keeps the relative error within a few ulp, so values stay positive
// (subnormal) down to z = -38 and the symmetry |cdf(z)+cdf(-z)-1| <= 1e-15
// holds throughout.
double std_cdf(double z);

// log(std_cdf(z)) with an asymptotic branch for deep left tails where the
// CDF itself would underflow.
double ln_std_cdf(double z);

// Inverse of std_cdf.  Rational initializer (Acklam 2003 coefficients)
// followed by two Newton corrections on std_cdf; |std_cdf(result) - p|
// stays below 1e-12 over the whole open interval.
double std_quantile(ProbLevel p);

// CVaR of a standard Gaussian at tail mass eps:
//   CVaR_{1-eps}(Y) = pdf(quantile(1-eps)) / eps,
// the mean of the upper eps-tail.  Always >= quantile(1-eps).
double gaussian_cvar(ProbLevel tail);

// E[Y * 1{Y >= t}] for standard Gaussian Y; equals std_pdf(t).
double upper_partial_expectation(double t);

// Generalized mean m_alpha(a, b; theta) interpolating between min
// (alpha = -inf), harmonic, geometric (alpha = 0), arithmetic and max
// (alpha = +inf).  Zero whenever a*b == 0.  Evaluated in the log domain
// for finite nonzero alpha so small |alpha| does not overflow; |alpha|
// below 1e-12 falls through to the geometric branch (the map is
// continuous in alpha).
double m_alpha(double a, double b, double theta, double alpha);

// Quantile, tail CVaR and partial expectation of the standard Gaussian,
// all at one CDF level (e.g. level = 1 - eps).
struct StdGaussianStats {
  ProbLevel level;
  double var;                 // quantile at `level`
  double cvar;                // mean of the tail above `var`
  double partial_expectation; // E[Y 1{Y >= var}] = pdf(var)

  static StdGaussianStats at(ProbLevel cdf_level);
};

}  // namespace wasscc
