#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "wasscc/common.hpp"
#include "wasscc/individual.hpp"
#include "wasscc/joint_rhs.hpp"

namespace wasscc {

enum class Verdict { kPass, kFail, kIndeterminate };

std::string to_string(Verdict v);

// Monte Carlo verdict on a single membership question.  The band is three
// standard errors wide: anything closer to the boundary is indeterminate.
struct Certificate {
  double statistic;
  double std_error;
  std::uint64_t n_samples;
  Verdict verdict;
  std::uint64_t seed;

  // One-line record: statistic,std_error,n_samples,verdict,seed
  std::string to_line() const;
};

// Safety system frozen at a decision x: rows^T zeta <= bounds with dual-norm
// weights per row.  A zero weight marks a row whose random part vanishes
// (deterministic slack).
struct SafetyAt {
  enum class Shape { kIndividual, kBox };
  Shape shape;
  Eigen::MatrixXd rows;     // m x dim(zeta)
  Eigen::VectorXd bounds;   // m
  Eigen::VectorXd weights;  // m dual norms

  static SafetyAt individual(const IndividualInstance& inst, const Eigen::VectorXd& x);
  // Normalized joint RHS system zeta <= b(x) (identity rows, unit weights).
  static SafetyAt rhs_box(const ProductionInstance& inst, const Eigen::VectorXd& x);
};

// Distance from zeta to the unsafe set, (min_i slack_i / w_i)^+.  Rows with
// zero weight are deterministic: a negative deterministic slack makes the
// point surely unsafe (distance 0), otherwise the row is ignored.  +inf when
// every row is deterministic and safe (empty unsafe set).
double dist_unsafe(const SafetyAt& safety, const Eigen::VectorXd& zeta);

// Distance from zeta to the safe set.  Supported shapes: a single
// inequality (halfspace projection) and the box zeta <= bounds
// (componentwise clip).  General row systems are rejected.
double dist_safe(const SafetyAt& safety, const Eigen::VectorXd& zeta);

// Rockafellar-Uryasev CVaR of an empirical sample at the given tail mass:
// gamma* + mean((v - gamma*)^+) / tail with gamma* the ceil((1-tail) N)-th
// order statistic.  Values must be finite.
double empirical_cvar(const std::vector<double>& values, ProbLevel tail);

// Pessimistic membership certificate:
//   statistic = delta/eps + CVaR_{1-eps}(-dist_unsafe)  (feasible iff <= 0)
Certificate certify_pess(const IndividualInstance& inst, const Eigen::VectorXd& x,
                         std::uint64_t n_samples, std::uint64_t seed);
Certificate certify_pess(const ProductionInstance& inst, const Eigen::VectorXd& x,
                         std::uint64_t n_samples, std::uint64_t seed);

// Optimistic membership certificate:
//   statistic = delta/(1-eps) + CVaR_{eps}(-dist_safe)  (feasible iff >= 0)
Certificate certify_opt(const IndividualInstance& inst, const Eigen::VectorXd& x,
                        std::uint64_t n_samples, std::uint64_t seed);
Certificate certify_opt(const ProductionInstance& inst, const Eigen::VectorXd& x,
                        std::uint64_t n_samples, std::uint64_t seed);

}  // namespace wasscc
