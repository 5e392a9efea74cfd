#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "wasscc/gaussian.hpp"
#include "wasscc/soc_coeff.hpp"

using namespace wasscc;

// Frozen with 50-digit arithmetic (mpmath), solving the stationarity
// equation of the coefficient objectives exactly.
namespace frozen {
constexpr double kCp15_005 = 1.2516159698288;
constexpr double kCp15_01 = 1.34609726160524;
constexpr double kCo15_005 = 0.83614693083162;
constexpr double kCo15_01 = 0.756719930552609;
constexpr double kCo50_01 = -0.224371803095;
constexpr double kCp15_1em8 = 1.03672628390774;
constexpr double kCo15_1em8 = 1.03614052471439;
constexpr double kWatershed15 = 0.1657835051477504;
}  // namespace frozen

namespace {

// Dense-grid oracle over the inner level; independent of the search logic.
double grid_c_pess(double eps, double delta, int points) {
  const double z = std_quantile(ProbLevel(1.0 - eps));
  const double pe = std_pdf(z);
  double best = std::numeric_limits<double>::infinity();
  const double lo = 1e-9, hi = eps - 1e-9;
  for (int i = 0; i <= points; ++i) {
    const double ep = lo + (hi - lo) * i / static_cast<double>(points);
    const double zp = std_quantile(ProbLevel(1.0 - ep));
    best = std::min(best, (delta + pe - std_pdf(zp)) / (eps - ep));
  }
  return best;
}

double grid_c_opt(double eps, double delta, int points) {
  const double z = std_quantile(ProbLevel(eps));
  const double pe = std_pdf(z);
  double best = -std::numeric_limits<double>::infinity();
  const double lo = eps + 1e-9, hi = 1.0 - 1e-9;
  for (int i = 0; i <= points; ++i) {
    const double ep = lo + (hi - lo) * i / static_cast<double>(points);
    const double zp = std_quantile(ProbLevel(ep));
    best = std::max(best, (-delta + std_pdf(zp) - pe) / (ep - eps));
  }
  return best;
}

}  // namespace

TEST_CASE("c_pess at frozen reference points") {
  CHECK(c_pess(ProbLevel(0.15), 0.005).c ==
        doctest::Approx(frozen::kCp15_005).epsilon(1e-10));
  CHECK(c_pess(ProbLevel(0.15), 0.01).c ==
        doctest::Approx(frozen::kCp15_01).epsilon(1e-10));
  CHECK(c_pess(ProbLevel(0.15), 1e-8).c ==
        doctest::Approx(frozen::kCp15_1em8).epsilon(1e-10));
}

TEST_CASE("c_pess strictly grows with the radius") {
  const double a = c_pess(ProbLevel(0.15), 0.005).c;
  const double b = c_pess(ProbLevel(0.15), 0.01).c;
  CHECK(b > a);
}

TEST_CASE("c_pess agrees with a dense grid minimization") {
  const double grid = grid_c_pess(0.15, 0.005, 1000000);
  CHECK(std::fabs(c_pess(ProbLevel(0.15), 0.005).c - grid) <= 1e-6);
}

TEST_CASE("c_pess domain errors") {
  CHECK_THROWS_AS(c_pess(ProbLevel(0.51), 0.01), std::invalid_argument);
  CHECK_THROWS_AS(c_pess(ProbLevel(0.15), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(c_pess(ProbLevel(0.15), -1.0), std::invalid_argument);
  CHECK_NOTHROW(c_pess(ProbLevel(0.5), 0.01));
}

TEST_CASE("c_opt at frozen reference points") {
  CHECK(c_opt(ProbLevel(0.15), 0.005).c ==
        doctest::Approx(frozen::kCo15_005).epsilon(1e-10));
  CHECK(c_opt(ProbLevel(0.15), 0.01).c ==
        doctest::Approx(frozen::kCo15_01).epsilon(1e-10));
  CHECK(c_opt(ProbLevel(0.15), 1e-8).c ==
        doctest::Approx(frozen::kCo15_1em8).epsilon(1e-10));
  CHECK(c_opt(ProbLevel(0.5), 0.01).c ==
        doctest::Approx(frozen::kCo50_01).epsilon(1e-9));
  CHECK(c_opt(ProbLevel(0.5), 0.01).c < 0.0);
}

TEST_CASE("c_opt near the watershed radius is near zero") {
  CHECK(std::fabs(c_opt(ProbLevel(0.15), 0.16578).c) <= 1e-4);
  CHECK(std::fabs(c_opt(ProbLevel(0.15), frozen::kWatershed15).c) <= 1e-10);
}

TEST_CASE("c_opt agrees with a dense grid maximization") {
  const double grid = grid_c_opt(0.15, 0.005, 1000000);
  CHECK(std::fabs(c_opt(ProbLevel(0.15), 0.005).c - grid) <= 1e-6);
  const double grid_neg = grid_c_opt(0.5, 0.01, 1000000);
  CHECK(std::fabs(c_opt(ProbLevel(0.5), 0.01).c - grid_neg) <= 1e-6);
}

TEST_CASE("c_opt domain error") {
  CHECK_THROWS_AS(c_opt(ProbLevel(0.15), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(c_opt(ProbLevel(0.15), -0.1), std::invalid_argument);
}

TEST_CASE("coefficient ordering and shrinking gaps") {
  for (const double eps : {0.05, 0.15, 0.3}) {
    const double z = std_quantile(ProbLevel(1.0 - eps));
    double prev_gap_p = std::numeric_limits<double>::infinity();
    double prev_gap_o = std::numeric_limits<double>::infinity();
    for (const double delta : {1e-2, 1e-4, 1e-6, 1e-8}) {
      const double cp = c_pess(ProbLevel(eps), delta).c;
      const double co = c_opt(ProbLevel(eps), delta).c;
      CHECK(cp >= z);
      CHECK(co <= z);
      CHECK(cp - z < prev_gap_p);
      CHECK(z - co < prev_gap_o);
      prev_gap_p = cp - z;
      prev_gap_o = z - co;
    }
    // both coefficients collapse onto the quantile as delta vanishes
    CHECK(std::fabs(c_pess(ProbLevel(eps), 1e-12).c - z) <= 1e-5);
    CHECK(std::fabs(c_opt(ProbLevel(eps), 1e-12).c - z) <= 1e-5);
  }
}

TEST_CASE("monotonicity of both coefficients in delta") {
  for (const double eps : {0.1, 0.3}) {
    double prev_p = -1e300, prev_o = 1e300;
    for (double delta = 1e-4; delta <= 0.3; delta *= 4.0) {
      const double cp = c_pess(ProbLevel(eps), delta).c;
      const double co = c_opt(ProbLevel(eps), delta).c;
      CHECK(cp > prev_p);
      CHECK(co < prev_o);
      prev_p = cp;
      prev_o = co;
    }
  }
}

TEST_CASE("stationarity residual via partial-expectation differences") {
  // delta + int_{1-eps}^{1-eps'} VaR_q dq = VaR_{1-eps'}(Y) (eps - eps'),
  // the integral written as a difference of upper partial expectations.
  for (const double eps : {0.05, 0.15, 0.3, 0.5}) {
    for (const double delta : {1e-6, 1e-3, 0.05}) {
      const CoeffResult res = c_pess(ProbLevel(eps), delta);
      const double z_eps = std_quantile(ProbLevel(1.0 - eps));
      const double z_p = std_quantile(ProbLevel(1.0 - res.argopt_eps_prime));
      const double integral =
          upper_partial_expectation(z_eps) - upper_partial_expectation(z_p);
      const double lhs = delta + integral;
      const double rhs = z_p * (eps - res.argopt_eps_prime);
      CHECK(std::fabs(lhs - rhs) <= 1e-8);
      CHECK(res.residual <= 1e-8);
      CHECK(res.argopt_eps_prime > 0.0);
      CHECK(res.argopt_eps_prime < eps);
    }
  }
}

TEST_CASE("watershed closed form and limits") {
  const WatershedPoint p = watershed(ProbLevel(0.15));
  CHECK(p.delta_star == doctest::Approx(frozen::kWatershed15).epsilon(1e-10));
  CHECK(std::fabs(c_opt(ProbLevel(0.15), p.delta_star).c) <= 1e-8);

  // eps -> 0+: delta* -> pdf(0)
  CHECK(watershed(ProbLevel(1e-8)).delta_star ==
        doctest::Approx(0.3989423).epsilon(1e-6));
  // eps -> 1/2-: delta* -> 0
  CHECK(watershed(ProbLevel(0.5 - 1e-6)).delta_star <= 1e-6);

  CHECK_THROWS_AS(watershed(ProbLevel(0.5)), std::invalid_argument);
  CHECK_THROWS_AS(watershed(ProbLevel(0.7)), std::invalid_argument);
}

TEST_CASE("watershed sign test") {
  for (const double eps : {0.05, 0.15, 0.3, 0.45}) {
    const double ds = watershed(ProbLevel(eps)).delta_star;
    CHECK(c_opt(ProbLevel(eps), 0.9 * ds).c > 0.0);
    CHECK(c_opt(ProbLevel(eps), 1.1 * ds).c < 0.0);
  }
}

TEST_CASE("watershed_sweep ordering and consistency") {
  const auto rows = watershed_sweep({ProbLevel(0.1), ProbLevel(0.2), ProbLevel(0.3)});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].delta_star > rows[1].delta_star);
  CHECK(rows[1].delta_star > rows[2].delta_star);

  const auto single = watershed_sweep({ProbLevel(0.15)});
  CHECK(single.at(0).delta_star ==
        doctest::Approx(watershed(ProbLevel(0.15)).delta_star).epsilon(1e-15));

  CHECK_THROWS_AS(watershed_sweep({ProbLevel(0.2), ProbLevel(0.1)}),
                  std::invalid_argument);
}
