#include "wasscc/individual.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "wasscc/gaussian.hpp"
#include "wasscc/soc_coeff.hpp"

namespace wasscc {

double resolve_coefficient(const AmbiguitySpec& amb, CcMode mode) {
  if (amb.delta == 0.0)
    return std_quantile(ProbLevel(1.0 - amb.eps.value()));  // nominal (CC)
  return mode == CcMode::kPessimistic ? c_pess(amb.eps, amb.delta).c
                                      : c_opt(amb.eps, amb.delta).c;
}

IndividualInstance::IndividualInstance(Eigen::VectorXd mu, Eigen::MatrixXd sigma,
                                       AffineSafety safety, AmbiguitySpec amb,
                                       bool require_pd)
    : mu_(std::move(mu)),
      sigma_(std::move(sigma)),
      safety_(std::move(safety)),
      amb_(amb) {
  const auto d = mu_.size();
  if (sigma_.rows() != d || sigma_.cols() != d)
    throw std::invalid_argument("IndividualInstance: covariance shape mismatch");
  if ((sigma_ - sigma_.transpose()).lpNorm<Eigen::Infinity>() >
      1e-10 * std::max(1.0, sigma_.lpNorm<Eigen::Infinity>()))
    throw std::invalid_argument("IndividualInstance: covariance must be symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_);
  const double scale = std::max(sigma_.trace(), std::numeric_limits<double>::min());
  Eigen::VectorXd lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-12 * scale)
      throw std::invalid_argument("IndividualInstance: covariance not PSD");
    if (lam[i] < 1e-12 * scale) {
      if (require_pd)
        throw std::invalid_argument(
            "IndividualInstance: covariance is rank deficient");
      lam[i] = 0.0;
    }
  }
  sigma_sqrt_ = es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
                es.eigenvectors().transpose();
}

Membership soc_membership(const IndividualInstance& inst, const Eigen::VectorXd& x,
                          double coefficient) {
  const Eigen::VectorXd a = inst.safety().a(x);
  const double b = inst.safety().b(x);
  if (a.lpNorm<Eigen::Infinity>() == 0.0) return {b >= 0.0, b};
  const double margin = b - a.dot(inst.mu()) - coefficient * inst.dual_norm(a);
  return {margin >= 0.0, margin};
}

Membership soc_membership(const IndividualInstance& inst, const Eigen::VectorXd& x,
                          CcMode mode) {
  return soc_membership(inst, x, resolve_coefficient(inst.amb(), mode));
}

void PortfolioInstance::validate() const {
  const auto n = mean_returns.size();
  if (n == 0) throw std::invalid_argument("portfolio: no assets");
  if (covariance.rows() != n || covariance.cols() != n)
    throw std::invalid_argument("portfolio: covariance shape mismatch");
  if (!std::isfinite(target_return))
    throw std::invalid_argument("portfolio: target return must be finite");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
  const double scale = std::max(covariance.trace(), 1e-300);
  if (es.eigenvalues().minCoeff() < -1e-12 * scale)
    throw std::invalid_argument("portfolio: covariance not PSD");
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool zero_row = covariance.row(i).lpNorm<Eigen::Infinity>() <= 1e-14 * scale;
    if (covariance(i, i) <= 0.0 && !zero_row)
      throw std::invalid_argument(
          "portfolio: asset " + std::to_string(i) +
          " has nonpositive variance but nonzero covariances");
  }
}

IndividualInstance PortfolioInstance::to_individual() const {
  const auto n = mean_returns.size();
  AffineSafety safety;
  safety.a0 = Eigen::VectorXd::Zero(n);
  safety.A = -Eigen::MatrixXd::Identity(n, n);
  safety.b0 = -target_return;
  safety.bx = Eigen::VectorXd::Zero(n);
  return IndividualInstance(mean_returns, covariance, std::move(safety), amb,
                            /*require_pd=*/false);
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  const auto n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0);
}

namespace {

// max mu^T x  s.t.  margin(x) := mu^T x - eta - c ||Sigma^{1/2} x||_2 >= 0,
// x in the unit simplex.
struct PortfolioProblem {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd sqrt_sigma;
  double eta;
  double c;

  double margin(const Eigen::VectorXd& x) const {
    return mu.dot(x) - eta - c * (sqrt_sigma * x).norm();
  }
  Eigen::VectorXd margin_grad(const Eigen::VectorXd& x) const {
    const double s = (sqrt_sigma * x).norm();
    if (s <= 0.0) return mu;  // valid subgradient at the kink
    return mu - (c / s) * (sigma * x);
  }
};

struct SubgradOutcome {
  Eigen::VectorXd averaged;
  Eigen::VectorXd best_feasible;
  double best_objective = -std::numeric_limits<double>::infinity();
  bool found_feasible = false;
  long iterations = 0;
};

SubgradOutcome run_penalized(const PortfolioProblem& prob, double rho,
                             const Eigen::VectorXd& x0, long max_iters) {
  SubgradOutcome out;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(x.size());
  long avg_count = 0;
  double eta0 = 0.0;
  for (long k = 1; k <= max_iters; ++k) {
    const double m = prob.margin(x);
    if (m >= -1e-12) {
      const double obj = prob.mu.dot(x);
      if (obj > out.best_objective) {
        out.best_objective = obj;
        out.best_feasible = x;
        out.found_feasible = true;
      }
    }
    Eigen::VectorXd g = prob.mu;
    if (m < 0.0) g += rho * prob.margin_grad(x);
    if (k == 1) eta0 = 0.25 / std::max(1.0, g.norm());
    x = project_simplex(x + (eta0 / std::sqrt(static_cast<double>(k))) * g);
    if (2 * k > max_iters) {
      avg += x;
      ++avg_count;
    }
  }
  out.averaged = project_simplex(avg / static_cast<double>(std::max(avg_count, 1L)));
  out.iterations = max_iters;
  return out;
}

struct KktInternal {
  bool ok = false;
  double stationarity = 0.0;
  double dual_violation = 0.0;
  double complementarity = 0.0;
};

// First-order optimality of x for the simplex-constrained cone problem;
// handles the norm kink at supports made solely of zero-variance assets.
KktInternal kkt_eval(const PortfolioProblem& prob, const Eigen::VectorXd& x,
                     double tol) {
  const int n = static_cast<int>(prob.mu.size());
  const double m = prob.margin(x);
  KktInternal rep;

  if (m < -tol) return {false, 0.0, -m, -m};

  if (m > tol) {
    // Constraint slack: x must maximize the linear objective.
    rep.stationarity = prob.mu.maxCoeff() - prob.mu.dot(x);
    rep.ok = rep.stationarity <= tol;
    return rep;
  }

  rep.complementarity = std::fabs(m);
  std::vector<int> support;
  for (int i = 0; i < n; ++i)
    if (x[i] > tol) support.push_back(i);
  if (support.empty()) return {false, 1.0, 0.0, rep.complementarity};

  const double cov_scale = std::max(prob.sigma.trace(), 1e-300);
  if ((prob.sqrt_sigma * x).norm() <= 1e-12 * std::sqrt(cov_scale)) {
    // Kink case.  Support returns must agree, deterministic outsiders must
    // not beat it, and no nonnegative risky direction may achieve an excess
    // return ratio above the coefficient: max_w r^T w / ||Sigma^{1/2} w||.
    const double nu = prob.mu[support.front()];
    for (int i : support)
      rep.stationarity = std::max(rep.stationarity, std::fabs(prob.mu[i] - nu));
    std::vector<int> risky;
    for (int i = 0; i < n; ++i) {
      if (x[i] > tol) continue;
      const bool deterministic =
          prob.sigma.row(i).lpNorm<Eigen::Infinity>() <= 1e-14 * cov_scale;
      if (deterministic)
        rep.dual_violation = std::max(rep.dual_violation, prob.mu[i] - nu);
      else if (prob.mu[i] > nu)
        risky.push_back(i);
    }
    if (!risky.empty()) {
      const int k = static_cast<int>(risky.size());
      Eigen::VectorXd r(k);
      Eigen::MatrixXd cov(k, k);
      for (int i = 0; i < k; ++i) {
        r[i] = prob.mu[risky[i]] - nu;
        for (int j = 0; j < k; ++j) cov(i, j) = prob.sigma(risky[i], risky[j]);
      }
      const Eigen::VectorXd w = cov.ldlt().solve(r);
      double ratio;
      if (w.minCoeff() >= -1e-12) {
        ratio = std::sqrt(std::max(r.dot(w), 0.0));  // sign-free max attained
      } else {
        // Sign-constrained: probe by projected ascent of the ratio.
        ratio = 0.0;
        Eigen::VectorXd p = Eigen::VectorXd::Constant(k, 1.0 / k);
        for (int it = 1; it <= 2000; ++it) {
          const double s = std::sqrt(std::max(p.dot(cov * p), 1e-30));
          ratio = std::max(ratio, r.dot(p) / s);
          Eigen::VectorXd grad = r / s - (r.dot(p) / (s * s * s)) * (cov * p);
          p = (p + (0.5 / std::sqrt(static_cast<double>(it))) * grad).cwiseMax(0.0);
          const double tot = p.sum();
          if (tot <= 1e-14)
            p = Eigen::VectorXd::Constant(k, 1.0 / k);
          else
            p /= tot;
        }
      }
      rep.dual_violation = std::max(rep.dual_violation, ratio - prob.c);
    }
    rep.ok = rep.stationarity <= tol && rep.dual_violation <= tol;
    return rep;
  }

  const Eigen::VectorXd g = prob.margin_grad(x);

  // Least-squares fit of (lambda, nu) on the support:
  //   mu_i + lambda g_i - nu = 0  for x_i > 0.
  double sgg = 0, sg = 0, sgm = 0, sm = 0;
  for (int i : support) {
    sgg += g[i] * g[i];
    sg += g[i];
    sgm += g[i] * prob.mu[i];
    sm += prob.mu[i];
  }
  const double p = static_cast<double>(support.size());
  const double det = sgg * p - sg * sg;
  double lambda, nu;
  if (std::fabs(det) > 1e-14 * std::max(1.0, sgg * p)) {
    lambda = (-sgm * p + sg * sm) / det;
    nu = (sgg * sm - sg * sgm) / det;
  } else {
    lambda = 0.0;  // gradient constant on support; fold it into nu
    nu = sm / p;
  }

  for (int i : support)
    rep.stationarity =
        std::max(rep.stationarity, std::fabs(prob.mu[i] + lambda * g[i] - nu));
  rep.dual_violation = std::max(0.0, -lambda);
  for (int i = 0; i < n; ++i) {
    if (x[i] > tol) continue;
    rep.dual_violation =
        std::max(rep.dual_violation, prob.mu[i] + lambda * g[i] - nu);
  }
  rep.ok = rep.stationarity <= tol && rep.dual_violation <= tol;
  return rep;
}

// Newton refinement on the face {x_i > 0, i in P} with the cone constraint
// active.  Solves the stationarity system in (w, lambda, nu); the caller
// re-checks full KKT and adjusts the face on failure.
struct PolishResult {
  bool converged = false;
  Eigen::VectorXd w;
  double lambda = 0.0;
  double nu = 0.0;
};

PolishResult polish_face(const PortfolioProblem& prob, const std::vector<int>& face,
                         const Eigen::VectorXd& x_start) {
  PolishResult res;
  const int p = static_cast<int>(face.size());
  Eigen::VectorXd mu_p(p);
  Eigen::MatrixXd sig_p(p, p);
  for (int i = 0; i < p; ++i) {
    mu_p[i] = prob.mu[face[i]];
    for (int j = 0; j < p; ++j) sig_p(i, j) = prob.sigma(face[i], face[j]);
  }

  Eigen::VectorXd w(p);
  for (int i = 0; i < p; ++i) w[i] = std::max(x_start[face[i]], 1e-8);
  w /= w.sum();

  auto face_grad = [&](const Eigen::VectorXd& wv) -> Eigen::VectorXd {
    const double s = std::sqrt(std::max(wv.dot(sig_p * wv), 0.0));
    if (s <= 0.0) return mu_p;
    return mu_p - (prob.c / s) * (sig_p * wv);
  };
  double lambda = 1.0, nu = 0.0;
  {
    const Eigen::VectorXd g = face_grad(w);
    Eigen::Matrix2d M;
    Eigen::Vector2d rhs;
    M << g.squaredNorm(), -g.sum(), -g.sum(), static_cast<double>(p);
    rhs << -g.dot(mu_p), mu_p.sum();
    const Eigen::Vector2d sol =
        (M + 1e-12 * Eigen::Matrix2d::Identity()).fullPivLu().solve(rhs);
    lambda = sol[0];
    nu = sol[1];
  }

  for (int it = 0; it < 60; ++it) {
    const Eigen::VectorXd sw = sig_p * w;
    const double s = std::sqrt(std::max(w.dot(sw), 0.0));
    if (s <= 1e-14) return res;  // riskless face; handled by the caller
    const Eigen::VectorXd grad_m = mu_p - (prob.c / s) * sw;

    Eigen::VectorXd F(p + 2);
    F.head(p) = mu_p + lambda * grad_m - nu * Eigen::VectorXd::Ones(p);
    F[p] = mu_p.dot(w) - prob.eta - prob.c * s;
    F[p + 1] = w.sum() - 1.0;
    if (F.lpNorm<Eigen::Infinity>() < 1e-13) {
      res.converged = true;
      res.w = w;
      res.lambda = lambda;
      res.nu = nu;
      return res;
    }

    Eigen::MatrixXd hess_m = -(prob.c / s) * (sig_p - (sw * sw.transpose()) / (s * s));
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(p + 2, p + 2);
    J.topLeftCorner(p, p) = lambda * hess_m;
    J.block(0, p, p, 1) = grad_m;
    J.block(0, p + 1, p, 1) = -Eigen::VectorXd::Ones(p);
    J.block(p, 0, 1, p) = grad_m.transpose();
    J.block(p + 1, 0, 1, p) = Eigen::RowVectorXd::Ones(p);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible()) return res;
    const Eigen::VectorXd step = lu.solve(-F);
    const double cap =
        1.0 / std::max(1.0, step.head(p).lpNorm<Eigen::Infinity>() / 0.5);
    w += cap * step.head(p);
    lambda += cap * step[p];
    nu += cap * step[p + 1];
  }
  return res;
}

// Face-adjusting polish pipeline seeded by a near-optimal point.  Returns
// a point passing the first-order check at `tol`, or nothing.
std::optional<Eigen::VectorXd> try_polish(const PortfolioProblem& prob,
                                          const Eigen::VectorXd& seed, double tol) {
  const int n = static_cast<int>(prob.mu.size());
  std::vector<int> face;
  for (int i = 0; i < n; ++i)
    if (seed[i] > 1e-4) face.push_back(i);
  if (face.empty()) {
    int top = 0;
    for (int i = 1; i < n; ++i)
      if (seed[i] > seed[top]) top = i;
    face.push_back(top);
  }

  for (int adjust = 0; adjust < 4 * n && !face.empty(); ++adjust) {
    if (face.size() == 1) {
      Eigen::VectorXd vx = Eigen::VectorXd::Zero(n);
      vx[face.front()] = 1.0;
      if (prob.margin(vx) >= -1e-12 && kkt_eval(prob, vx, tol).ok) return vx;
      return std::nullopt;
    }
    const PolishResult pol = polish_face(prob, face, seed);
    if (!pol.converged) {
      // shed the weakest coordinate and retry on the smaller face
      int weakest = 0;
      for (int i = 1; i < static_cast<int>(face.size()); ++i)
        if (seed[face[i]] < seed[face[weakest]]) weakest = i;
      face.erase(face.begin() + weakest);
      continue;
    }
    int worst = -1;
    double worst_w = -1e-10;
    for (int i = 0; i < static_cast<int>(face.size()); ++i)
      if (pol.w[i] < worst_w) {
        worst_w = pol.w[i];
        worst = i;
      }
    if (worst >= 0) {
      face.erase(face.begin() + worst);
      continue;
    }
    if (pol.lambda < -1e-10) return std::nullopt;  // constraint should be slack
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < static_cast<int>(face.size()); ++i) full[face[i]] = pol.w[i];
    const Eigen::VectorXd g = prob.margin_grad(full);
    int violator = -1;
    double worst_v = 1e-10;
    for (int i = 0; i < n; ++i) {
      if (std::find(face.begin(), face.end(), i) != face.end()) continue;
      const double r = prob.mu[i] + pol.lambda * g[i] - pol.nu;
      if (r > worst_v) {
        worst_v = r;
        violator = i;
      }
    }
    if (violator >= 0) {
      face.push_back(violator);
      std::sort(face.begin(), face.end());
      continue;
    }
    if (kkt_eval(prob, full, tol).ok) return full;
    return std::nullopt;
  }
  return std::nullopt;
}

PortfolioSolution grid_enumerate(const PortfolioProblem& prob, int n) {
  // Escape hatch for the non-convex optimistic region: exhaustive 1e-3 grid.
  const int steps = 1000;
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x;
  Eigen::VectorXd x(n);
  auto consider = [&](const Eigen::VectorXd& cand) {
    if (prob.margin(cand) >= 0.0) {
      const double obj = prob.mu.dot(cand);
      if (obj > best) {
        best = obj;
        best_x = cand;
      }
    }
  };
  if (n == 1) {
    x[0] = 1.0;
    consider(x);
  } else if (n == 2) {
    for (int i = 0; i <= steps; ++i) {
      x[0] = i / static_cast<double>(steps);
      x[1] = 1.0 - x[0];
      consider(x);
    }
  } else {
    for (int i = 0; i <= steps; ++i)
      for (int j = 0; j + i <= steps; ++j) {
        x[0] = i / static_cast<double>(steps);
        x[1] = j / static_cast<double>(steps);
        x[2] = 1.0 - x[0] - x[1];
        consider(x);
      }
  }
  if (!best_x.size())
    throw InfeasibleError("portfolio: no simplex grid point satisfies the constraint");
  return PortfolioSolution{best_x, best, prob.margin(best_x), steps, false, false};
}

}  // namespace

PortfolioSolution solve_portfolio(const PortfolioInstance& inst, CcMode mode,
                                  double tol, bool allow_nonconvex) {
  inst.validate();
  const int n = inst.n_assets();
  const double c = resolve_coefficient(inst.amb, mode);
  IndividualInstance ind = inst.to_individual();
  PortfolioProblem prob{inst.mean_returns, inst.covariance, ind.sigma_sqrt(),
                        inst.target_return, c};

  if (c < 0.0) {
    if (!allow_nonconvex)
      throw std::invalid_argument(
          "portfolio: optimistic coefficient is negative, the feasible region "
          "is non-convex; rerun with the non-convex override (n <= 3)");
    if (n > 3)
      throw std::invalid_argument(
          "portfolio: non-convex enumeration only supported for n <= 3");
    return grid_enumerate(prob, n);
  }

  // If the best vertex of the linear objective is feasible the constraint is
  // slack at the optimum and we are done.
  int best_vertex = 0;
  for (int i = 1; i < n; ++i)
    if (prob.mu[i] > prob.mu[best_vertex]) best_vertex = i;
  {
    Eigen::VectorXd vx = Eigen::VectorXd::Zero(n);
    vx[best_vertex] = 1.0;
    const double m = prob.margin(vx);
    if (m >= 0.0) {
      bool tie = false;
      for (int i = 0; i < n; ++i)
        if (i != best_vertex && prob.mu[i] >= prob.mu[best_vertex] - 1e-12) tie = true;
      return PortfolioSolution{vx, prob.mu.dot(vx), m, 0, true, tie};
    }
  }

  // A vertex can be the optimum even with the constraint active (e.g. a
  // deterministic asset when no risky direction beats the coefficient);
  // certify the best feasible vertex before the iterative phase.
  {
    int best_feas = -1;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd vx = Eigen::VectorXd::Zero(n);
      vx[i] = 1.0;
      if (prob.margin(vx) < -1e-12) continue;
      if (best_feas < 0 || prob.mu[i] > prob.mu[best_feas]) best_feas = i;
    }
    if (best_feas >= 0) {
      Eigen::VectorXd vx = Eigen::VectorXd::Zero(n);
      vx[best_feas] = 1.0;
      if (kkt_eval(prob, vx, std::min(tol, 1e-7)).ok)
        return PortfolioSolution{vx,   prob.mu.dot(vx), prob.margin(vx),
                                 0,    true,            false};
    }
  }

  // Exact-penalty subgradient + active-set Newton polish.  The averaged
  // iterate only has to land near the optimum; the polish restores the
  // active constraint and the stationarity system to solver precision.
  Eigen::VectorXd start = Eigen::VectorXd::Constant(n, 1.0 / n);
  const long cap = 100000;
  double rho = 8.0;
  long total_iters = 0;
  std::optional<Eigen::VectorXd> fallback;  // best merely-feasible point seen
  auto keep_fallback = [&](const Eigen::VectorXd& x) {
    if (prob.margin(x) < -1e-9) return;
    if (!fallback || prob.mu.dot(x) > prob.mu.dot(*fallback)) fallback = x;
  };

  for (int attempt = 0; attempt < 8; ++attempt) {
    const SubgradOutcome sub = run_penalized(prob, rho, start, cap);
    total_iters += sub.iterations;
    if (sub.found_feasible) keep_fallback(sub.best_feasible);
    keep_fallback(sub.averaged);

    if (auto polished = try_polish(prob, sub.averaged, std::min(tol, 1e-7))) {
      return PortfolioSolution{*polished,   prob.mu.dot(*polished),
                               prob.margin(*polished), total_iters,
                               true,        false};
    }
    if (sub.found_feasible) {
      if (auto polished =
              try_polish(prob, sub.best_feasible, std::min(tol, 1e-7))) {
        return PortfolioSolution{*polished,   prob.mu.dot(*polished),
                                 prob.margin(*polished), total_iters,
                                 true,        false};
      }
    }
    start = sub.averaged;
    rho *= 2.0;
  }

  if (fallback) {
    // No certified stationary point, but a feasible iterate exists; report
    // it without the `polished` flag so callers can tell the difference.
    return PortfolioSolution{*fallback,  prob.mu.dot(*fallback),
                             prob.margin(*fallback), total_iters,
                             false,      false};
  }

  // Nothing feasible ever showed up: decide infeasibility by maximizing the
  // (concave) margin itself.
  PortfolioProblem feas = prob;
  feas.mu = Eigen::VectorXd::Zero(n);
  const SubgradOutcome probe = run_penalized(feas, 1.0, start, cap);
  if (prob.margin(probe.averaged) < -1e-7)
    throw InfeasibleError("portfolio: no simplex point satisfies the cone constraint");
  throw ConvergenceError("portfolio: exact-penalty subgradient failed to settle");
}

KktReport kkt_check(const PortfolioInstance& inst, CcMode mode,
                    const Eigen::VectorXd& x, double tol) {
  const double c = resolve_coefficient(inst.amb, mode);
  IndividualInstance ind = inst.to_individual();
  PortfolioProblem prob{inst.mean_returns, inst.covariance, ind.sigma_sqrt(),
                        inst.target_return, c};
  const KktInternal rep = kkt_eval(prob, x, tol);
  return KktReport{rep.ok, rep.stationarity, rep.dual_violation,
                   rep.complementarity};
}

}  // namespace wasscc
