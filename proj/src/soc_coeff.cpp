#include "wasscc/soc_coeff.hpp"

#include <cmath>
#include <functional>

#include "wasscc/gaussian.hpp"

namespace wasscc {

namespace {

constexpr double kEdge = 1e-9;      // clip distance from the open-interval ends
constexpr double kEpsTol = 1e-10;   // absolute tolerance on eps'
constexpr double kGolden = 0.6180339887498949;

struct SearchOutcome {
  double eps_prime;
  int iterations;
};

// Golden-section pass to bracket the optimum of a unimodal objective,
// then bisection on the (monotone) derivative-sign function.  `deriv_sign`
// must be increasing for a minimum and decreasing for a maximum; either
// way the root is bracketed by the sign change.
SearchOutcome unimodal_search(double lo, double hi,
                              const std::function<double(double)>& objective,
                              bool minimize,
                              const std::function<double(double)>& deriv_sign) {
  int iters = 0;
  double a = lo, b = hi;
  double x1 = b - kGolden * (b - a);
  double x2 = a + kGolden * (b - a);
  double f1 = objective(x1), f2 = objective(x2);
  while (b - a > 1e-6) {
    const bool keep_left = minimize ? (f1 < f2) : (f1 > f2);
    if (keep_left) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kGolden * (b - a);
      f1 = objective(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kGolden * (b - a);
      f2 = objective(x2);
    }
    ++iters;
  }

  // Expand back to the clipped interval if the sign change escaped the
  // golden bracket (happens when the stationary point sits almost on an
  // endpoint).
  double sa = deriv_sign(a), sb = deriv_sign(b);
  if (sa * sb > 0.0) {
    a = lo;
    b = hi;
    sa = deriv_sign(a);
    sb = deriv_sign(b);
  }
  if (sa * sb > 0.0) {
    // Stationary point lies outside the admissible interval; the optimum
    // is pinned at the nearer endpoint.
    const bool root_below = minimize ? (sa > 0.0) : (sa < 0.0);
    return {root_below ? lo : hi, iters};
  }
  while (b - a > kEpsTol) {
    const double mid = 0.5 * (a + b);
    const double sm = deriv_sign(mid);
    if (sm == 0.0) return {mid, iters};
    if (sa * sm < 0.0) {
      b = mid;
    } else {
      a = mid;
      sa = sm;
    }
    ++iters;
  }
  return {0.5 * (a + b), iters};
}

}  // namespace

CoeffResult c_pess(ProbLevel eps_level, double delta) {
  const double eps = eps_level.value();
  if (eps > 0.5)
    throw std::invalid_argument("c_pess: risk level must satisfy eps <= 1/2");
  if (!(delta > 0.0)) throw std::invalid_argument("c_pess: radius must be positive");

  const double z_eps = std_quantile(ProbLevel(1.0 - eps));
  const double pe_eps = upper_partial_expectation(z_eps);

  auto objective = [&](double ep) {
    const double zp = std_quantile(ProbLevel(1.0 - ep));
    return (delta + pe_eps - upper_partial_expectation(zp)) / (eps - ep);
  };
  // Sign of the quotient's derivative; strictly increasing in eps'.
  auto deriv_sign = [&](double ep) {
    const double zp = std_quantile(ProbLevel(1.0 - ep));
    return delta + pe_eps - upper_partial_expectation(zp) - zp * (eps - ep);
  };

  const SearchOutcome out =
      unimodal_search(kEdge, eps - kEdge, objective, /*minimize=*/true, deriv_sign);
  return CoeffResult{objective(out.eps_prime), out.eps_prime, out.iterations,
                     std::fabs(deriv_sign(out.eps_prime))};
}

CoeffResult c_opt(ProbLevel eps_level, double delta) {
  const double eps = eps_level.value();
  if (!(delta > 0.0)) throw std::invalid_argument("c_opt: radius must be positive");

  const double z_eps = std_quantile(eps_level);
  const double pe_eps = upper_partial_expectation(z_eps);

  auto objective = [&](double ep) {
    const double zp = std_quantile(ProbLevel(ep));
    return (-delta + upper_partial_expectation(zp) - pe_eps) / (ep - eps);
  };
  // Strictly decreasing in eps'; positive left of the maximizer.
  auto deriv_sign = [&](double ep) {
    const double zp = std_quantile(ProbLevel(ep));
    return delta + pe_eps - upper_partial_expectation(zp) - zp * (ep - eps);
  };

  const SearchOutcome out =
      unimodal_search(eps + kEdge, 1.0 - kEdge, objective, /*minimize=*/false, deriv_sign);
  return CoeffResult{objective(out.eps_prime), out.eps_prime, out.iterations,
                     std::fabs(deriv_sign(out.eps_prime))};
}

WatershedPoint watershed(ProbLevel eps_level) {
  const double eps = eps_level.value();
  if (eps >= 0.5)
    throw std::invalid_argument("watershed: no positive radius exists for eps >= 1/2");

  const double closed_form = std_pdf(0.0) - std_pdf(std_quantile(eps_level));

  // Cross-check by root-finding on c_opt, which is decreasing in delta.
  double lo = 0.5 * closed_form, hi = 1.5 * closed_form;
  if (c_opt(eps_level, lo).c < 0.0 || c_opt(eps_level, hi).c > 0.0)
    throw ConvergenceError("watershed: root of c_opt not bracketed around closed form");
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    (c_opt(eps_level, mid).c > 0.0 ? lo : hi) = mid;
  }
  const double root = 0.5 * (lo + hi);
  if (std::fabs(root - closed_form) > 1e-6)
    throw ConvergenceError("watershed: closed form and c_opt root disagree beyond 1e-6");

  return WatershedPoint{eps, closed_form};
}

std::vector<WatershedPoint> watershed_sweep(const std::vector<ProbLevel>& eps_grid) {
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (eps_grid[i].value() >= 0.5)
      throw std::invalid_argument("watershed_sweep: grid must stay inside (0, 1/2)");
    if (i > 0 && eps_grid[i].value() <= eps_grid[i - 1].value())
      throw std::invalid_argument("watershed_sweep: grid must be strictly increasing");
  }
  std::vector<WatershedPoint> rows;
  rows.reserve(eps_grid.size());
  for (const ProbLevel& e : eps_grid) rows.push_back(watershed(e));
  return rows;
}

}  // namespace wasscc
