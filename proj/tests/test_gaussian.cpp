#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracle_gaussian.hpp"
#include "wasscc/gaussian.hpp"
#include "wasscc/philox.hpp"

using namespace wasscc;

// 50-digit mpmath anchors (also validate the long double oracle itself).
namespace anchors {
constexpr double kQuantile85 = 1.036433389493789579713244;
constexpr double kPdfAtQ85 = 0.2331587752536822745648968;
constexpr double kPdfAt1_0364334 = 0.2331587727148193383470071;
constexpr double kCdfAt1_0364334 = 0.8500000024496151408146204;
constexpr double kCvar15 = 1.554391835024548497099312;
constexpr double kPdf0 = 0.3989422804014326779399461;
}  // namespace anchors

TEST_CASE("oracle agrees with mpmath anchors and with itself") {
  CHECK(std::fabs(static_cast<double>(oracle::cdf(1.0364334L)) -
                  anchors::kCdfAt1_0364334) < 1e-16);
  CHECK(std::fabs(static_cast<double>(oracle::quantile(0.85L)) -
                  anchors::kQuantile85) < 1e-15);
  CHECK(std::fabs(static_cast<double>(oracle::pdf(1.0364334L)) -
                  anchors::kPdfAt1_0364334) < 1e-16);
  // series and continued fraction must agree where both apply
  for (double z = 1.0; z <= 2.5; z += 0.1) {
    const long double a = oracle::series_cdf(z);
    const long double b = 1.0L - oracle::upper_tail(z);
    CHECK(std::fabs(static_cast<double>(a - b)) < 1e-18);
  }
  // deep-tail anchor: cdf(-37) from mpmath
  const double tail37 = static_cast<double>(oracle::cdf(-37.0L));
  CHECK(tail37 == doctest::Approx(5.725571223e-300).epsilon(1e-8));
}

TEST_CASE("std_pdf values and symmetry") {
  CHECK(std_pdf(0.0) == doctest::Approx(anchors::kPdf0).epsilon(1e-15));
  CHECK(std_pdf(1.0364334) == doctest::Approx(anchors::kPdfAt1_0364334).epsilon(1e-13));
  for (double z = -8.0; z <= 8.0; z += 0.37) {
    CHECK(std_pdf(z) == std_pdf(-z));
    CHECK(std_pdf(z) > 0.0);
  }
}

TEST_CASE("std_cdf values, symmetry, monotonicity, tails") {
  CHECK(std_cdf(0.0) == 0.5);
  CHECK(std_cdf(1.0364334) == doctest::Approx(anchors::kCdfAt1_0364334).epsilon(1e-14));
  for (double z = -8.0; z <= 8.0; z += 0.177)
    CHECK(std::fabs(std_cdf(z) + std_cdf(-z) - 1.0) <= 1e-15);
  double prev = 0.0;
  for (double z = -38.0; z <= 38.0; z += 0.25) {
    const double c = std_cdf(z);
    CHECK(c >= prev);
    prev = c;
  }
  CHECK(std_cdf(-38.0) > 0.0);
  CHECK(std_cdf(-37.0) > 0.0);
  // no spurious zero anywhere down to -38
  for (double z = -38.0; z <= -30.0; z += 0.5) CHECK(std_cdf(z) > 0.0);
}

TEST_CASE("std_cdf matches the extended-precision oracle") {
  double worst = 0.0;
  for (double z = -37.0; z <= 37.0; z += 0.0371) {
    const double err = std::fabs(std_cdf(z) - static_cast<double>(oracle::cdf(z)));
    worst = std::max(worst, err);
  }
  CHECK(worst <= 1e-15);
  // relative accuracy in the left tail
  for (double z = -36.0; z <= -8.0; z += 1.0) {
    const long double ref = oracle::cdf(z);
    CHECK(std::fabs(static_cast<double>((std_cdf(z) - ref) / ref)) < 1e-12);
  }
}

TEST_CASE("std_quantile values and roundtrip") {
  CHECK(std::fabs(std_quantile(ProbLevel(0.5))) < 1e-15);
  CHECK(std_quantile(ProbLevel(0.85)) ==
        doctest::Approx(anchors::kQuantile85).epsilon(1e-13));
  CHECK(std_quantile(ProbLevel(0.15)) ==
        doctest::Approx(-anchors::kQuantile85).epsilon(1e-13));

  // |cdf(quantile(p)) - p| <= 1e-12 over the whole open interval
  std::vector<double> ps;
  for (double e = 1e-12; e < 0.5; e *= 3.7) {
    ps.push_back(e);
    ps.push_back(1.0 - e);
  }
  for (double p = 0.02; p < 1.0; p += 0.02) ps.push_back(p);
  for (const double p : ps) {
    const double q = std_quantile(ProbLevel(p));
    CHECK(std::fabs(std_cdf(q) - p) <= 1e-12 * std::max(1.0, p));
    CHECK(std::fabs(std_cdf(q) - p) <= 1e-12);
  }

  // strictly increasing
  double prev = -1e300;
  for (double p = 0.001; p < 1.0; p += 0.001) {
    const double q = std_quantile(ProbLevel(p));
    CHECK(q > prev);
    prev = q;
  }
}

TEST_CASE("cdf/quantile roundtrip on z") {
  for (double z = -37.0; z <= 8.0; z += 0.23) {
    const double c = std_cdf(z);
    const double rt = std_cdf(std_quantile(ProbLevel(c)));
    CHECK(std::fabs(rt - c) <= 1e-10);
  }
}

TEST_CASE("std_quantile against the oracle at many points") {
  // q-space comparison only where it is well conditioned; dq/dp = 1/pdf
  // blows up any q metric in the far right tail of a double-precision p.
  double worst = 0.0;
  for (int i = 1; i < 2000; ++i) {
    const double p = 0.001 + 0.998 * i / 2000.0;
    const double err = std::fabs(std_quantile(ProbLevel(p)) -
                                 static_cast<double>(oracle::quantile(p)));
    worst = std::max(worst, err);
  }
  CHECK(worst <= 1e-12);
  // in the tails the contract is the cdf residual, checked at full range
  for (double p = 1e-10; p < 0.9999; p = p * 2.3 + 1e-6)
    CHECK(std::fabs(std_cdf(std_quantile(ProbLevel(p))) - p) <= 1e-12);
}

TEST_CASE("gaussian_cvar values and dominance over VaR") {
  CHECK(gaussian_cvar(ProbLevel(0.5)) ==
        doctest::Approx(2.0 * anchors::kPdf0).epsilon(1e-13));
  CHECK(gaussian_cvar(ProbLevel(0.15)) ==
        doctest::Approx(anchors::kCvar15).epsilon(1e-12));
  for (double eps = 0.01; eps <= 0.49; eps += 0.01)
    CHECK(gaussian_cvar(ProbLevel(eps)) > std_quantile(ProbLevel(1.0 - eps)));
}

namespace {

// Rockafellar-Uryasev CVaR on an empirical sample, written out directly so
// this check does not lean on the library's own estimator.
double sample_cvar(std::vector<double> v, double tail) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const std::size_t k = static_cast<std::size_t>(
      std::ceil((1.0 - tail) * static_cast<double>(n)));
  const double gamma = v[k - 1];
  double acc = 0.0;
  for (const double x : v) acc += std::max(x - gamma, 0.0);
  return gamma + acc / (tail * n);
}

}  // namespace

TEST_CASE("gaussian_cvar agrees with the minimizing-form sample average") {
  const std::size_t n = 1000000;
  const PhiloxStream stream(20240915, 0);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = stream.gaussian(i, 0);

  const double tail = 0.15;
  const int blocks = 20;
  std::vector<double> block_stats(blocks);
  const std::size_t bs = n / blocks;
  for (int b = 0; b < blocks; ++b)
    block_stats[b] = sample_cvar(
        std::vector<double>(y.begin() + b * bs, y.begin() + (b + 1) * bs), tail);
  double mean = 0.0;
  for (const double s : block_stats) mean += s;
  mean /= blocks;
  double var = 0.0;
  for (const double s : block_stats) var += (s - mean) * (s - mean);
  const double se = std::sqrt(var / (blocks - 1) / blocks);

  CHECK(std::fabs(sample_cvar(y, tail) - gaussian_cvar(ProbLevel(tail))) <=
        3.0 * se + 1e-3);
}

TEST_CASE("negative-part CVaR identity on Monte Carlo samples") {
  // CVaR_{1-eps}(X^-) = 1{0 >= VaR_{1-eps}(X)} (CVaR_{1-eps}(X) - E[X^+]/eps)
  const double eps = 0.15;
  const std::size_t n = 1000000;
  const PhiloxStream stream(777001, 0);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = stream.gaussian(i, 0);

  for (const double shift : {-2.0, 0.0, 2.0}) {
    std::vector<double> neg(n);
    for (std::size_t i = 0; i < n; ++i) neg[i] = std::min(y[i] - shift, 0.0);

    const double var_x = std_quantile(ProbLevel(1.0 - eps)) - shift;
    const double cvar_x = gaussian_cvar(ProbLevel(eps)) - shift;
    // E[(Y - shift)^+] = pdf(shift) - shift * (1 - cdf(shift))
    const double pos_part = std_pdf(shift) - shift * (1.0 - std_cdf(shift));
    const double rhs = (0.0 >= var_x) ? cvar_x - pos_part / eps : 0.0;

    const int blocks = 20;
    const std::size_t bs = n / blocks;
    std::vector<double> stats(blocks);
    for (int b = 0; b < blocks; ++b)
      stats[b] = sample_cvar(
          std::vector<double>(neg.begin() + b * bs, neg.begin() + (b + 1) * bs), eps);
    double mean = 0.0;
    for (const double s : stats) mean += s;
    mean /= blocks;
    double var = 0.0;
    for (const double s : stats) var += (s - mean) * (s - mean);
    const double se = std::sqrt(var / (blocks - 1) / blocks);

    CHECK(std::fabs(sample_cvar(neg, eps) - rhs) <= 3.0 * se + 1e-3);
  }
}

TEST_CASE("upper_partial_expectation identities") {
  CHECK(upper_partial_expectation(0.0) ==
        doctest::Approx(anchors::kPdf0).epsilon(1e-13));
  CHECK(upper_partial_expectation(40.0) <= 1e-300);
  CHECK(upper_partial_expectation(1.0364334) ==
        doctest::Approx(anchors::kPdfAt1_0364334).epsilon(1e-12));
  // quadrature oracle of int_t^inf y pdf(y) dy
  for (const double t : {-1.0, 0.3, 1.0364334, 2.5}) {
    const double quad = static_cast<double>(oracle::partial_expectation_quad(t));
    CHECK(upper_partial_expectation(t) == doctest::Approx(quad).epsilon(1e-9));
  }
}

TEST_CASE("m_alpha branches") {
  CHECK(m_alpha(0.0, 5.0, 0.3, 1.0) == 0.0);
  CHECK(m_alpha(5.0, 0.0, 0.3, 1.0) == 0.0);
  CHECK(m_alpha(2.0, 8.0, 0.5, 0.0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(m_alpha(2.0, 8.0, 0.5, -1.0) == doctest::Approx(3.2).epsilon(1e-14));
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(m_alpha(2.0, 8.0, 0.5, inf) == 8.0);
  CHECK(m_alpha(2.0, 8.0, 0.5, -inf) == 2.0);
  CHECK(m_alpha(2.0, 8.0, 0.5, 1.0) == doctest::Approx(5.0).epsilon(1e-14));
  // theta endpoints
  CHECK(m_alpha(2.0, 8.0, 1.0, 2.5) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(m_alpha(2.0, 8.0, 0.0, 2.5) == doctest::Approx(8.0).epsilon(1e-13));
  // continuity across the alpha = 0 switch
  CHECK(m_alpha(2.0, 8.0, 0.5, 1e-13) == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(m_alpha(2.0, 8.0, 0.5, -1e-13) == doctest::Approx(4.0).epsilon(1e-9));
  // tiny alpha with extreme magnitudes stays finite (log-domain path)
  const double v = m_alpha(1e-200, 1e+200, 0.5, 1e-6);
  CHECK(std::isfinite(v));
  CHECK(v > 0.0);
}

TEST_CASE("m_alpha is nondecreasing in alpha") {
  const PhiloxStream stream(5150, 0);
  const double inf = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 200; ++trial) {
    const double a = 1e-3 + 10.0 * stream.uniform(trial, 0);
    const double b = 1e-3 + 10.0 * stream.uniform(trial, 1);
    const double theta = stream.uniform(trial, 2);
    const std::vector<double> alphas = {-inf, -7.0, -1.0, -1e-4, 0.0,
                                        1e-4, 0.5,  1.0,  3.0,   inf};
    double prev = -1.0;
    for (const double alpha : alphas) {
      const double v = m_alpha(a, b, theta, alpha);
      CHECK(v >= prev - 1e-11 * std::max(1.0, std::fabs(v)));
      prev = v;
    }
  }
}

TEST_CASE("ProbLevel rejects endpoints") {
  CHECK_THROWS_AS(ProbLevel(0.0), std::invalid_argument);
  CHECK_THROWS_AS(ProbLevel(1.0), std::invalid_argument);
  CHECK_THROWS_AS(ProbLevel(-0.2), std::invalid_argument);
  CHECK_THROWS_AS(ProbLevel(std::nan("")), std::invalid_argument);
  CHECK(ProbLevel(0.15).complement().value() == doctest::Approx(0.85));
}

TEST_CASE("StdGaussianStats bundles consistent values") {
  for (const double level : {0.6, 0.85, 0.95, 0.999}) {
    const auto s = StdGaussianStats::at(ProbLevel(level));
    CHECK(s.cvar >= s.var);
    CHECK(s.partial_expectation == doctest::Approx(std_pdf(s.var)).epsilon(1e-12));
    CHECK(s.cvar ==
          doctest::Approx(s.partial_expectation / (1.0 - level)).epsilon(1e-12));
  }
}
