#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "wasscc/common.hpp"

namespace wasscc {

// Joint right-hand-side chance constraint instance: demands zeta_i are
// independent Gaussians and the safety system reads
//
//   row_scale_i * zeta_i <= row_scale_i-weighted (coverage x)_i ,
//
// i.e. the i-th inequality carries a positive scalar coefficient on the
// demand.  After normalize_rows every coefficient is one and the system is
// the plain coverage form  zeta <= coverage * x.  All slack/φ computations
// divide by the row scale internally, so they are invariant under it.
struct ProductionInstance {
  Eigen::MatrixXd coverage;     // T, m x n, every row must touch a facility
  Eigen::VectorXd cost;         // procurement costs, n, nonnegative
  double capacity;              // common upper bound U on each x_j
  Eigen::VectorXd demand_mean;  // m
  Eigen::VectorXd demand_std;   // m, strictly positive
  Eigen::VectorXd row_scale;    // m, strictly positive; all ones once normalized
  AmbiguitySpec amb;

  int n_facilities() const { return static_cast<int>(coverage.cols()); }
  int n_demands() const { return static_cast<int>(coverage.rows()); }
  void validate() const;
  // Normalized right-hand side b(x) = (T x)_i / row_scale_i.
  Eigen::VectorXd rhs(const Eigen::VectorXd& x) const;
};

// Rescale every inequality to a unit coefficient.  Feasible region, slack
// function and φ are unchanged.  Throws on a zero scale or an empty row.
ProductionInstance normalize_rows(const ProductionInstance& inst);

// Minimal normalized slack f(x, zeta) = min_i (b_i(x) - zeta_i).
double f_min(const ProductionInstance& inst, const Eigen::VectorXd& x,
             const Eigen::VectorXd& zeta);

// P[f(x, zeta) >= t] = prod_i Phi((b_i(x) - t - mu_i)/sigma_i); strictly
// decreasing in t.
double survival(const ProductionInstance& inst, const Eigen::VectorXd& x, double t);

// The t solving survival(x, t) = 1 - eps, i.e. the eps-VaR of f(x, zeta).
// May be negative; callers decide what a negative value means.  Brackets by
// geometric expansion (up to 60 demand standard deviations) and bisects to
// |survival - (1-eps)| <= 1e-10.
double var_f(const ProductionInstance& inst, const Eigen::VectorXd& x,
             ProbLevel eps);

// Robustness budget phi(x, y) = int_0^y (survival(x,t) - (1-eps)) dt by
// adaptive Simpson quadrature (absolute tolerance `tol`, at most 2^20
// panels).
double phi(const ProductionInstance& inst, const Eigen::VectorXd& x, double y,
           double tol = 1e-9);

// Analytic x-gradient of phi, same quadrature control.
Eigen::VectorXd grad_x_phi(const ProductionInstance& inst, const Eigen::VectorXd& x,
                           double y, double tol = 1e-9);

// eps_k-approximate maximizer of phi(., y) over the budget polytope
// {0 <= x <= U, cost^T x <= u}.  Projected gradient ascent on ln(phi) with
// Armijo backtracking; stops once the unit-step gradient mapping norm falls
// below eps_k (or after 5e4 ascent steps).  Throws if the polytope is empty.
Eigen::VectorXd oracle_max_x(const ProductionInstance& inst, double y, double u,
                             double eps_k,
                             const std::optional<Eigen::VectorXd>& warm_start = {});

// Starting point with VaR_eps(f(x1, zeta)) >= eps0 > 0, obtained by
// maximizing survival(x, eps0) for a diminishing ladder of eps0 values.
// Empty optional: no such point exists for any ladder entry, in which case
// rho(u) = 0.
std::optional<Eigen::VectorXd> initial_point(
    const ProductionInstance& inst, double u,
    const std::vector<double>& eps0_sequence = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6});

struct BcaIterate {
  Eigen::VectorXd x;
  double y;
  double phi;
  double oracle_tol;  // eps_k used to produce this iterate
};

enum class BcaStop { kYConverged, kIterationCap, kInfeasibleStart };

struct BcaTrace {
  std::vector<BcaIterate> iterates;
  BcaStop stop_reason = BcaStop::kIterationCap;
};

struct BcaOptions {
  double y_tol = 1e-6;   // stop once |y_k - y_{k+1}| falls below this;
                         // negative disables the rule (runs to max_iters)
  int max_iters = 200;
  double eps1 = 1e-3;    // oracle tolerance schedule eps_k = eps1 / k
};

struct BcaResult {
  double rho;  // phi at the final iterate; 0 when no feasible start exists
  BcaTrace trace;
};

// Block coordinate ascent evaluating rho(u) = sup {phi(x, y) : cost^T x <= u}.
BcaResult bca_rho(const ProductionInstance& inst, double u, BcaOptions opts = {});

// rho(u) along a nondecreasing budget grid; honors WASSCC_THREADS.
std::vector<std::pair<double, double>> envelope_sweep(
    const ProductionInstance& inst, const std::vector<double>& u_grid,
    BcaOptions opts = {});

struct MinCostResult {
  double u_star;
  Eigen::VectorXd x;
  BcaResult certifying_run;
};

// Smallest budget whose rho(u) reaches the instance radius, by bisection
// over [0, cost^T (U 1)] to relative width 1e-4.  Throws InfeasibleError
// when even the full budget cannot reach the radius.
MinCostResult min_cost(const ProductionInstance& inst, double delta_target,
                       BcaOptions opts = {});

// Projection onto {0 <= x <= U} intersected with {cost^T x <= u}; clipping
// plus dual bisection on the budget multiplier.
Eigen::VectorXd project_budget_box(const Eigen::VectorXd& v, double capacity,
                                   const Eigen::VectorXd& cost, double u);

}  // namespace wasscc
