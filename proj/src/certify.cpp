#include "wasscc/certify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "wasscc/detail/parallel.hpp"
#include "wasscc/philox.hpp"

namespace wasscc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kBootstrapResamples = 200;

// Philox stream ids; keep reference samples, bootstrap indices and any
// future consumers on disjoint streams of the same seed.
constexpr std::uint32_t kStreamSamples = 0;
constexpr std::uint32_t kStreamBootstrap = 1;

double order_statistic_cvar(std::vector<double>& scratch, double tail) {
  const std::size_t n = scratch.size();
  const std::size_t k =
      static_cast<std::size_t>(std::ceil((1.0 - tail) * static_cast<double>(n)));
  const std::size_t idx = (k == 0 ? 0 : k - 1);
  std::nth_element(scratch.begin(), scratch.begin() + idx, scratch.end());
  const double gamma = scratch[idx];
  double acc = 0.0;
  for (const double v : scratch)
    if (v > gamma) acc += v - gamma;
  return gamma + acc / (tail * static_cast<double>(n));
}

double bootstrap_se(const std::vector<double>& values, double tail,
                    std::uint64_t seed) {
  const std::size_t n = values.size();
  const PhiloxStream stream(seed, kStreamBootstrap);
  std::vector<double> stats(kBootstrapResamples);
  detail::parallel_for(kBootstrapResamples, [&](std::size_t r) {
    std::vector<double> resampled(n);
    // two 32-bit index draws per counter-based block
    for (std::size_t i = 0; i < n; i += 2) {
      const std::uint64_t bits = stream.word64(r * n + i, 0);
      const std::uint32_t lo = static_cast<std::uint32_t>(bits);
      const std::uint32_t hi = static_cast<std::uint32_t>(bits >> 32);
      resampled[i] = values[(static_cast<std::uint64_t>(lo) * n) >> 32];
      if (i + 1 < n) resampled[i + 1] = values[(static_cast<std::uint64_t>(hi) * n) >> 32];
    }
    stats[r] = order_statistic_cvar(resampled, tail);
  });
  double mean = 0.0;
  for (const double s : stats) mean += s;
  mean /= kBootstrapResamples;
  double var = 0.0;
  for (const double s : stats) var += (s - mean) * (s - mean);
  return std::sqrt(var / (kBootstrapResamples - 1));
}

Certificate build_certificate(std::vector<double> neg_distances, double shift,
                              double tail, bool pass_on_high,
                              std::uint64_t n_samples, std::uint64_t seed) {
  // All-deterministic distance (e.g. a surely-safe system): the verdict is
  // exact, no sampling error.
  bool any_infinite = false;
  for (const double v : neg_distances)
    if (std::isinf(v)) any_infinite = true;
  if (any_infinite) {
    const double stat = -kInf + shift;  // -inf regardless of the finite shift
    const bool favorable = pass_on_high ? false : true;
    return Certificate{stat, 0.0, n_samples,
                       favorable ? Verdict::kPass : Verdict::kFail, seed};
  }

  std::vector<double> scratch = neg_distances;
  const double cvar = order_statistic_cvar(scratch, tail);
  const double stat = shift + cvar;
  const double se = bootstrap_se(neg_distances, tail, seed);

  Verdict verdict = Verdict::kIndeterminate;
  if (pass_on_high) {
    if (stat > 3.0 * se) verdict = Verdict::kPass;
    if (stat < -3.0 * se) verdict = Verdict::kFail;
  } else {
    if (stat < -3.0 * se) verdict = Verdict::kPass;
    if (stat > 3.0 * se) verdict = Verdict::kFail;
  }
  return Certificate{stat, se, n_samples, verdict, seed};
}

// Reference samples for the full-covariance Gaussian case.
std::vector<double> sample_distances_individual(
    const IndividualInstance& inst, const SafetyAt& safety, std::uint64_t n,
    std::uint64_t seed, double (*dist)(const SafetyAt&, const Eigen::VectorXd&)) {
  const PhiloxStream stream(seed, kStreamSamples);
  const Eigen::Index d = inst.mu().size();
  std::vector<double> out(n);
  detail::parallel_for(n, [&](std::size_t j) {
    Eigen::VectorXd z(d);
    for (Eigen::Index c = 0; c < d; ++c)
      z[c] = stream.gaussian(j, static_cast<std::uint32_t>(c));
    const Eigen::VectorXd zeta = inst.mu() + inst.sigma_sqrt() * z;
    out[j] = -dist(safety, zeta);
  });
  return out;
}

std::vector<double> sample_distances_production(
    const ProductionInstance& inst, const SafetyAt& safety, std::uint64_t n,
    std::uint64_t seed, double (*dist)(const SafetyAt&, const Eigen::VectorXd&)) {
  const PhiloxStream stream(seed, kStreamSamples);
  const Eigen::Index m = inst.n_demands();
  std::vector<double> out(n);
  detail::parallel_for(n, [&](std::size_t j) {
    Eigen::VectorXd zeta(m);
    for (Eigen::Index c = 0; c < m; ++c)
      zeta[c] = inst.demand_mean[c] +
                inst.demand_std[c] * stream.gaussian(j, static_cast<std::uint32_t>(c));
    out[j] = -dist(safety, zeta);
  });
  return out;
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass: return "pass";
    case Verdict::kFail: return "fail";
    default: return "indeterminate";
  }
}

std::string Certificate::to_line() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%llu,%s,%llu", statistic, std_error,
                static_cast<unsigned long long>(n_samples),
                to_string(verdict).c_str(), static_cast<unsigned long long>(seed));
  return buf;
}

SafetyAt SafetyAt::individual(const IndividualInstance& inst,
                              const Eigen::VectorXd& x) {
  SafetyAt s;
  s.shape = Shape::kIndividual;
  const Eigen::VectorXd a = inst.safety().a(x);
  s.rows = a.transpose();
  s.bounds = Eigen::VectorXd::Constant(1, inst.safety().b(x));
  s.weights = Eigen::VectorXd::Constant(1, inst.dual_norm(a));
  return s;
}

SafetyAt SafetyAt::rhs_box(const ProductionInstance& raw, const Eigen::VectorXd& x) {
  const ProductionInstance inst = normalize_rows(raw);
  SafetyAt s;
  s.shape = Shape::kBox;
  const Eigen::Index m = inst.n_demands();
  s.rows = Eigen::MatrixXd::Identity(m, m);
  s.bounds = inst.rhs(x);
  s.weights = Eigen::VectorXd::Ones(m);
  return s;
}

double dist_unsafe(const SafetyAt& safety, const Eigen::VectorXd& zeta) {
  double best = kInf;
  for (Eigen::Index i = 0; i < safety.bounds.size(); ++i) {
    const double slack = safety.bounds[i] - safety.rows.row(i).dot(zeta);
    if (safety.weights[i] <= 1e-300) {
      if (slack < 0.0) return 0.0;  // surely unsafe, zeta already outside
      continue;
    }
    best = std::min(best, slack / safety.weights[i]);
  }
  if (best == kInf) return kInf;  // unsafe set unreachable
  return std::max(best, 0.0);
}

double dist_safe(const SafetyAt& safety, const Eigen::VectorXd& zeta) {
  if (safety.shape == SafetyAt::Shape::kBox) {
    return (zeta - safety.bounds).cwiseMax(0.0).norm();
  }
  if (safety.bounds.size() != 1)
    throw std::invalid_argument(
        "dist_safe: general multi-row systems are not supported");
  const double slack = safety.rows.row(0).dot(zeta) - safety.bounds[0];
  if (safety.weights[0] <= 1e-300) return slack <= 0.0 ? 0.0 : kInf;
  return std::max(slack / safety.weights[0], 0.0);
}

double empirical_cvar(const std::vector<double>& values, ProbLevel tail) {
  if (values.empty()) throw std::invalid_argument("empirical_cvar: empty sample");
  for (const double v : values)
    if (!std::isfinite(v))
      throw std::invalid_argument("empirical_cvar: sample must be finite");
  std::vector<double> scratch = values;
  return order_statistic_cvar(scratch, tail.value());
}

Certificate certify_pess(const IndividualInstance& inst, const Eigen::VectorXd& x,
                         std::uint64_t n_samples, std::uint64_t seed) {
  const SafetyAt safety = SafetyAt::individual(inst, x);
  const double eps = inst.amb().eps.value();
  auto values = sample_distances_individual(inst, safety, n_samples, seed, dist_unsafe);
  return build_certificate(std::move(values), inst.amb().delta / eps, eps,
                           /*pass_on_high=*/false, n_samples, seed);
}

Certificate certify_pess(const ProductionInstance& inst, const Eigen::VectorXd& x,
                         std::uint64_t n_samples, std::uint64_t seed) {
  const SafetyAt safety = SafetyAt::rhs_box(inst, x);
  const double eps = inst.amb.eps.value();
  auto values = sample_distances_production(inst, safety, n_samples, seed, dist_unsafe);
  return build_certificate(std::move(values), inst.amb.delta / eps, eps,
                           /*pass_on_high=*/false, n_samples, seed);
}

Certificate certify_opt(const IndividualInstance& inst, const Eigen::VectorXd& x,
                        std::uint64_t n_samples, std::uint64_t seed) {
  const SafetyAt safety = SafetyAt::individual(inst, x);
  const double eps = inst.amb().eps.value();
  auto values = sample_distances_individual(inst, safety, n_samples, seed, dist_safe);
  return build_certificate(std::move(values), inst.amb().delta / (1.0 - eps),
                           1.0 - eps, /*pass_on_high=*/true, n_samples, seed);
}

Certificate certify_opt(const ProductionInstance& inst, const Eigen::VectorXd& x,
                        std::uint64_t n_samples, std::uint64_t seed) {
  const SafetyAt safety = SafetyAt::rhs_box(inst, x);
  const double eps = inst.amb.eps.value();
  auto values = sample_distances_production(inst, safety, n_samples, seed, dist_safe);
  return build_certificate(std::move(values), inst.amb.delta / (1.0 - eps),
                           1.0 - eps, /*pass_on_high=*/true, n_samples, seed);
}

}  // namespace wasscc
