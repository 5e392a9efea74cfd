#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "wasscc/common.hpp"

namespace wasscc {

enum class CcMode { kPessimistic, kOptimistic };

// Cone coefficient resolved once per (mode, eps, delta) triple.  delta = 0
// degenerates to the nominal chance-constraint coefficient quantile(1-eps)
// for either mode.
double resolve_coefficient(const AmbiguitySpec& amb, CcMode mode);

// Safety map of a single inequality a(x)^T zeta <= b(x) with both sides
// affine in the decision:  a(x) = a0 + A x,  b(x) = b0 + bx^T x.
struct AffineSafety {
  Eigen::VectorXd a0;
  Eigen::MatrixXd A;   // dim(zeta) x dim(x)
  double b0 = 0.0;
  Eigen::VectorXd bx;  // dim(x)

  Eigen::VectorXd a(const Eigen::VectorXd& x) const { return a0 + A * x; }
  double b(const Eigen::VectorXd& x) const { return b0 + bx.dot(x); }
};

// Individual chance constraint under a Gaussian reference.  The transport
// norm is ||Sigma^{-1/2}(.)||_2, whose dual weight ||Sigma^{1/2} a||_2 shows
// up in every membership margin and distance.
class IndividualInstance {
 public:
  // require_pd: reject covariance directions with (numerically) zero
  // variance.  Portfolio instances relax this so a deterministic asset can
  // ride along with a zero covariance row.
  IndividualInstance(Eigen::VectorXd mu, Eigen::MatrixXd sigma,
                     AffineSafety safety, AmbiguitySpec amb,
                     bool require_pd = true);

  const Eigen::VectorXd& mu() const { return mu_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const Eigen::MatrixXd& sigma_sqrt() const { return sigma_sqrt_; }
  const AffineSafety& safety() const { return safety_; }
  const AmbiguitySpec& amb() const { return amb_; }

  // ||Sigma^{1/2} v||_2, the dual norm of the transport norm.
  double dual_norm(const Eigen::VectorXd& v) const {
    return (sigma_sqrt_ * v).norm();
  }

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd sigma_sqrt_;
  AffineSafety safety_;
  AmbiguitySpec amb_;
};

struct Membership {
  bool feasible;
  double margin;  // b(x) - a(x)^T mu - c ||Sigma^{1/2} a(x)||_2
};

// Second-order-cone membership test.  A vanishing a(x) degenerates to the
// deterministic check b(x) >= 0.
Membership soc_membership(const IndividualInstance& inst, const Eigen::VectorXd& x,
                          CcMode mode);
// Same with the coefficient already resolved (hot loops).
Membership soc_membership(const IndividualInstance& inst, const Eigen::VectorXd& x,
                          double coefficient);

// Target-return portfolio over the unit simplex.  Zero covariance rows mark
// deterministic assets (e.g. a fixed deposit).
struct PortfolioInstance {
  Eigen::VectorXd mean_returns;
  Eigen::MatrixXd covariance;
  double target_return;
  AmbiguitySpec amb;
  std::vector<std::string> asset_names;  // optional; defaults to A1..An

  int n_assets() const { return static_cast<int>(mean_returns.size()); }
  void validate() const;
  IndividualInstance to_individual() const;
};

struct PortfolioSolution {
  Eigen::VectorXd x;
  double objective;
  double margin;
  long iterations;
  bool polished;    // active-set Newton refinement succeeded
  bool degenerate;  // several allocations share the optimum within tol
};

// Maximize expected return over the simplex subject to the cone constraint.
// Exact-penalty projected subgradient (rho doubled until feasible, steps
// eta0/sqrt(k), 1e5-iteration cap, sorting-based simplex projection)
// followed by an active-set Newton polish so the KKT conditions hold to
// solver precision.  A negative optimistic coefficient makes the region
// non-convex; such instances are rejected unless allow_nonconvex is set,
// in which case n <= 3 instances are solved by simplex-grid enumeration
// at step 1e-3.
PortfolioSolution solve_portfolio(const PortfolioInstance& inst, CcMode mode,
                                  double tol, bool allow_nonconvex = false);

struct KktReport {
  bool ok;
  double stationarity;     // worst stationarity violation on support
  double dual_violation;   // worst sign violation of a multiplier
  double complementarity;  // |margin| if treated active, 0 otherwise
};

// First-order optimality check at x for the simplex-constrained problem.
KktReport kkt_check(const PortfolioInstance& inst, CcMode mode,
                    const Eigen::VectorXd& x, double tol);

// Euclidean projection onto the unit simplex (sorting algorithm).
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v);

}  // namespace wasscc
