#include "wasscc/gaussian.hpp"

#include <cmath>
#include <limits>

namespace wasscc {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;  // 1/sqrt(2*pi)
constexpr double kSqrt1_2 = 0.7071067811865475244008444;     // 1/sqrt(2)
}  // namespace

double std_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double std_cdf(double z) { return 0.5 * std::erfc(-z * kSqrt1_2); }

double ln_std_cdf(double z) {
  if (z >= -35.0) return std::log(std_cdf(z));
  // Mills-ratio asymptotics: Phi(z) = pdf(z)/(-z) * (1 - 1/z^2 + 3/z^4 - ...)
  const double zz = z * z;
  const double series = 1.0 - 1.0 / zz + 3.0 / (zz * zz) - 15.0 / (zz * zz * zz);
  return -0.5 * zz - std::log(-z) + std::log(kInvSqrt2Pi) + std::log(series);
}

namespace {

// Rational approximation of the standard normal quantile, coefficients
// published by P. J. Acklam (2003); relative error below 1.2e-9 which the
// Newton polish below drives to machine precision.
double quantile_initializer(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double std_quantile(ProbLevel level) {
  const double p = level.value();
  double q = quantile_initializer(p);
  for (int it = 0; it < 2; ++it) {
    const double err = std_cdf(q) - p;
    const double density = std_pdf(q);
    if (density <= 0.0) break;  // beyond |q| ~ 38.6 the correction is lost anyway
    // Halley step: quadratic convergence from an already-good initializer.
    const double u = err / density;
    q -= u / (1.0 + 0.5 * q * u);
  }
  return q;
}

double gaussian_cvar(ProbLevel tail) {
  const double eps = tail.value();
  return std_pdf(std_quantile(ProbLevel(1.0 - eps))) / eps;
}

double upper_partial_expectation(double t) { return std_pdf(t); }

double m_alpha(double a, double b, double theta, double alpha) {
  if (!(a >= 0.0) || !(b >= 0.0))
    throw std::invalid_argument("m_alpha: arguments must be nonnegative");
  if (!(theta >= 0.0 && theta <= 1.0))
    throw std::invalid_argument("m_alpha: theta must lie in [0, 1]");
  if (a == 0.0 || b == 0.0) return 0.0;
  if (std::isinf(alpha)) return alpha > 0 ? std::max(a, b) : std::min(a, b);
  const double la = std::log(a);
  const double lb = std::log(b);
  if (std::fabs(alpha) < 1e-12) return std::exp(theta * la + (1.0 - theta) * lb);
  // (theta a^alpha + (1-theta) b^alpha)^{1/alpha}, factored so that large
  // |alpha * log| cannot overflow.
  const double va = alpha * la;
  const double vb = alpha * lb;
  const double vmax = std::max(va, vb);
  const double s = theta * std::exp(va - vmax) + (1.0 - theta) * std::exp(vb - vmax);
  return std::exp((vmax + std::log(s)) / alpha);
}

StdGaussianStats StdGaussianStats::at(ProbLevel cdf_level) {
  const double var = std_quantile(cdf_level);
  const double pe = std_pdf(var);
  return StdGaussianStats{cdf_level, var, pe / (1.0 - cdf_level.value()), pe};
}

}  // namespace wasscc
