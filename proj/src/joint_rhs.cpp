#include "wasscc/joint_rhs.hpp"

#include <cmath>
#include <limits>

#include "wasscc/detail/parallel.hpp"
#include "wasscc/gaussian.hpp"

namespace wasscc {

namespace {

constexpr double kPhiFloor = 1e-300;  // clamp before taking logs
constexpr long kAscentCap = 50000;

// pdf/cdf ratio (inverse Mills), stable in the deep left tail.
double mills_ratio(double z) {
  if (z > -8.0) return std_pdf(z) / std_cdf(z);
  const double log_pdf = -0.5 * z * z - 0.918938533204672742;  // ln sqrt(2 pi)
  return std::exp(log_pdf - ln_std_cdf(z));
}

double survival_at(const ProductionInstance& inst, const Eigen::VectorXd& bbar,
                   double t) {
  double prod = 1.0;
  for (Eigen::Index i = 0; i < bbar.size(); ++i) {
    prod *= std_cdf((bbar[i] - t - inst.demand_mean[i]) / inst.demand_std[i]);
    if (prod == 0.0) break;
  }
  return prod;
}

// ---- adaptive Simpson, scalar and vector flavors ------------------------

constexpr int kBasePanels = 32;
constexpr int kMaxDepth = 15;  // 32 * 2^15 = 2^20 panel cap

template <class F>
double simpson_scalar_rec(const F& f, double a, double m, double b, double fa,
                          double fm, double fb, double whole, double tol,
                          int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return simpson_scalar_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_scalar_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  const double h = (b - a) / kBasePanels;
  double total = 0.0;
  double x0 = a, f0 = f(a);
  for (int i = 0; i < kBasePanels; ++i) {
    const double x2 = (i == kBasePanels - 1) ? b : a + (i + 1) * h;
    const double xm = 0.5 * (x0 + x2);
    const double fmid = f(xm), f2 = f(x2);
    const double whole = (x2 - x0) / 6.0 * (f0 + 4.0 * fmid + f2);
    total += simpson_scalar_rec(f, x0, xm, x2, f0, fmid, f2, whole,
                                tol / kBasePanels, kMaxDepth);
    x0 = x2;
    f0 = f2;
  }
  return total;
}

template <class F>
Eigen::VectorXd simpson_vector_rec(const F& f, double a, double m, double b,
                                   const Eigen::VectorXd& fa,
                                   const Eigen::VectorXd& fm,
                                   const Eigen::VectorXd& fb,
                                   const Eigen::VectorXd& whole, double tol,
                                   int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const Eigen::VectorXd flm = f(lm), frm = f(rm);
  const Eigen::VectorXd left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const Eigen::VectorXd right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const Eigen::VectorXd delta = left + right - whole;
  if (depth <= 0 || delta.lpNorm<Eigen::Infinity>() <= 15.0 * tol)
    return left + right + delta / 15.0;
  return simpson_vector_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_vector_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
Eigen::VectorXd adaptive_simpson_vec(const F& f, Eigen::Index dim, double a,
                                     double b, double tol) {
  if (!(b > a)) return Eigen::VectorXd::Zero(dim);
  const double h = (b - a) / kBasePanels;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);
  double x0 = a;
  Eigen::VectorXd f0 = f(a);
  for (int i = 0; i < kBasePanels; ++i) {
    const double x2 = (i == kBasePanels - 1) ? b : a + (i + 1) * h;
    const double xm = 0.5 * (x0 + x2);
    const Eigen::VectorXd fmid = f(xm), f2 = f(x2);
    const Eigen::VectorXd whole = (x2 - x0) / 6.0 * (f0 + 4.0 * fmid + f2);
    total += simpson_vector_rec(f, x0, xm, x2, f0, fmid, f2, whole,
                                tol / kBasePanels, kMaxDepth);
    x0 = x2;
    f0 = f2;
  }
  return total;
}

// Integrand of the phi gradient at one t: coverage^T w with
// w_i = pdf(z_i)/(sigma_i * scale_i) * prod_{k != i} cdf(z_k).
Eigen::VectorXd grad_integrand(const ProductionInstance& inst,
                               const Eigen::VectorXd& bbar, double t) {
  const Eigen::Index m = bbar.size();
  Eigen::VectorXd cdfs(m), w(m);
  for (Eigen::Index i = 0; i < m; ++i)
    cdfs[i] = std_cdf((bbar[i] - t - inst.demand_mean[i]) / inst.demand_std[i]);
  // prefix/suffix products avoid dividing by a vanishing cdf
  Eigen::VectorXd pre(m), suf(m);
  double acc = 1.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    pre[i] = acc;
    acc *= cdfs[i];
  }
  acc = 1.0;
  for (Eigen::Index i = m - 1; i >= 0; --i) {
    suf[i] = acc;
    acc *= cdfs[i];
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    const double z = (bbar[i] - t - inst.demand_mean[i]) / inst.demand_std[i];
    w[i] = std_pdf(z) * pre[i] * suf[i] /
           (inst.demand_std[i] * inst.row_scale[i]);
  }
  return inst.coverage.transpose() * w;
}

}  // namespace

void ProductionInstance::validate() const {
  const Eigen::Index m = coverage.rows(), n = coverage.cols();
  if (m == 0 || n == 0) throw std::invalid_argument("production: empty system");
  if (cost.size() != n || demand_mean.size() != m || demand_std.size() != m ||
      row_scale.size() != m)
    throw std::invalid_argument("production: dimension mismatch");
  if (!(capacity > 0.0)) throw std::invalid_argument("production: capacity must be positive");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (coverage.row(i).lpNorm<Eigen::Infinity>() <= 0.0)
      throw std::invalid_argument("production: demand row " + std::to_string(i) +
                                  " is not covered by any facility");
    if (!(demand_std[i] > 0.0))
      throw std::invalid_argument("production: demand std must be positive");
    if (!(row_scale[i] > 0.0))
      throw std::invalid_argument("production: row scale must be positive (zero row)");
  }
  for (Eigen::Index j = 0; j < n; ++j)
    if (!(cost[j] >= 0.0))
      throw std::invalid_argument("production: costs must be nonnegative");
}

Eigen::VectorXd ProductionInstance::rhs(const Eigen::VectorXd& x) const {
  return (coverage * x).cwiseQuotient(row_scale);
}

ProductionInstance normalize_rows(const ProductionInstance& inst) {
  inst.validate();
  ProductionInstance out = inst;
  for (Eigen::Index i = 0; i < inst.coverage.rows(); ++i) {
    out.coverage.row(i) /= inst.row_scale[i];
    out.row_scale[i] = 1.0;
  }
  return out;
}

double f_min(const ProductionInstance& inst, const Eigen::VectorXd& x,
             const Eigen::VectorXd& zeta) {
  return (inst.rhs(x) - zeta).minCoeff();
}

double survival(const ProductionInstance& inst, const Eigen::VectorXd& x, double t) {
  return survival_at(inst, inst.rhs(x), t);
}

double var_f(const ProductionInstance& inst, const Eigen::VectorXd& x,
             ProbLevel eps) {
  const Eigen::VectorXd bbar = inst.rhs(x);
  const double target = 1.0 - eps.value();
  const double sd_max = inst.demand_std.maxCoeff();
  // survival((bbar - mu).min()) <= Phi(0) = 1/2; expand from there.
  const double t0 = (bbar - inst.demand_mean).minCoeff();

  double lo = t0, hi = t0;
  if (survival_at(inst, bbar, t0) >= target) {
    double span = sd_max;
    while (survival_at(inst, bbar, hi + span) >= target) {
      hi += span;
      span *= 2.0;
      if (hi > t0 + 60.0 * sd_max)
        throw ConvergenceError("var_f: no bracket within 60 demand sigmas");
    }
    hi += span;
  } else {
    double span = sd_max;
    while (survival_at(inst, bbar, lo - span) < target) {
      lo -= span;
      span *= 2.0;
      if (lo < t0 - 60.0 * sd_max)
        throw ConvergenceError("var_f: no bracket within 60 demand sigmas");
    }
    lo -= span;
  }

  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::fabs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (survival_at(inst, bbar, mid) >= target ? lo : hi) = mid;
  }
  const double t_star = 0.5 * (lo + hi);
  if (std::fabs(survival_at(inst, bbar, t_star) - target) > 1e-10)
    throw ConvergenceError("var_f: bisection residual above 1e-10");
  return t_star;
}

double phi(const ProductionInstance& inst, const Eigen::VectorXd& x, double y,
           double tol) {
  if (!(y >= 0.0)) throw std::invalid_argument("phi: y must be nonnegative");
  if (y == 0.0) return 0.0;
  const Eigen::VectorXd bbar = inst.rhs(x);
  const double level = 1.0 - inst.amb.eps.value();
  return adaptive_simpson(
      [&](double t) { return survival_at(inst, bbar, t) - level; }, 0.0, y, tol);
}

Eigen::VectorXd grad_x_phi(const ProductionInstance& inst, const Eigen::VectorXd& x,
                           double y, double tol) {
  if (!(y >= 0.0)) throw std::invalid_argument("grad_x_phi: y must be nonnegative");
  const Eigen::Index n = inst.coverage.cols();
  if (y == 0.0) return Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd bbar = inst.rhs(x);
  return adaptive_simpson_vec(
      [&](double t) { return grad_integrand(inst, bbar, t); }, n, 0.0, y, tol);
}

Eigen::VectorXd project_budget_box(const Eigen::VectorXd& v, double capacity,
                                   const Eigen::VectorXd& cost, double u) {
  auto clip = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    return w.cwiseMax(0.0).cwiseMin(capacity);
  };
  Eigen::VectorXd x = clip(v);
  if (cost.dot(x) <= u) return x;
  // dual bisection on the budget multiplier; cost >= 0 makes the residual
  // monotone in lambda
  double lam_lo = 0.0, lam_hi = 1.0;
  int guard = 0;
  while (cost.dot(clip(v - lam_hi * cost)) > u) {
    lam_hi *= 2.0;
    if (++guard > 200)
      throw InfeasibleError("project_budget_box: budget polytope is empty");
  }
  for (int it = 0; it < 200 && lam_hi - lam_lo > 1e-15 * (1.0 + lam_hi); ++it) {
    const double mid = 0.5 * (lam_lo + lam_hi);
    (cost.dot(clip(v - mid * cost)) > u ? lam_lo : lam_hi) = mid;
  }
  return clip(v - lam_hi * cost);  // the feasible side of the bracket
}

namespace {

// Projected gradient ascent on ln survival(x, t_level); used both to find
// a starting point and to climb back into dom(phi).  Stops early once the
// survival target is met (target < 0 disables that exit).
Eigen::VectorXd ascend_survival(const ProductionInstance& inst, double t_level,
                                double u, Eigen::VectorXd x, double target,
                                double gm_tol) {
  const auto obj = [&](const Eigen::VectorXd& p) {
    const Eigen::VectorXd bbar = inst.rhs(p);
    double s = 0.0;
    for (Eigen::Index i = 0; i < bbar.size(); ++i)
      s += ln_std_cdf((bbar[i] - t_level - inst.demand_mean[i]) / inst.demand_std[i]);
    return s;
  };
  const auto grad = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    const Eigen::VectorXd bbar = inst.rhs(p);
    Eigen::VectorXd w(bbar.size());
    for (Eigen::Index i = 0; i < bbar.size(); ++i) {
      const double z = (bbar[i] - t_level - inst.demand_mean[i]) / inst.demand_std[i];
      w[i] = mills_ratio(z) / (inst.demand_std[i] * inst.row_scale[i]);
    }
    return inst.coverage.transpose() * w;
  };

  double fx = obj(x);
  const double log_target = target > 0.0 ? std::log(target) : 1.0;
  double step = 1.0;
  for (long it = 0; it < kAscentCap; ++it) {
    if (target > 0.0 && fx >= log_target) break;
    const Eigen::VectorXd g = grad(x);
    const Eigen::VectorXd xm =
        project_budget_box(x + g, inst.capacity, inst.cost, u);
    if ((x - xm).norm() <= gm_tol) break;
    double t = std::min(step * 2.0, 1e6);
    bool accepted = false;
    for (int h = 0; h < 60; ++h) {
      const Eigen::VectorXd cand =
          project_budget_box(x + t * g, inst.capacity, inst.cost, u);
      const double fc = obj(cand);
      if (fc >= fx + 1e-4 * g.dot(cand - x)) {
        x = cand;
        fx = fc;
        step = t;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  return x;
}

// Projected Armijo ascent on raw phi; used while the iterate is still
// outside the region where ln(phi) is usable.
Eigen::VectorXd ascend_phi_raw(const ProductionInstance& inst, double y, double u,
                               Eigen::VectorXd x, double gm_tol) {
  double fx = phi(inst, x, y);
  double step = 1.0;
  for (long it = 0; it < kAscentCap; ++it) {
    if (fx > 2e-12) break;  // log regime takes over
    const Eigen::VectorXd g = grad_x_phi(inst, x, y);
    const Eigen::VectorXd xm = project_budget_box(x + g, inst.capacity, inst.cost, u);
    if ((x - xm).norm() <= gm_tol) break;
    double t = std::min(step * 2.0, 1e6);
    bool accepted = false;
    for (int h = 0; h < 60; ++h) {
      const Eigen::VectorXd cand =
          project_budget_box(x + t * g, inst.capacity, inst.cost, u);
      const double fc = phi(inst, cand, y);
      if (fc >= fx + 1e-4 * g.dot(cand - x)) {
        x = cand;
        fx = fc;
        step = t;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  return x;
}

}  // namespace

Eigen::VectorXd oracle_max_x(const ProductionInstance& inst, double y, double u,
                             double eps_k,
                             const std::optional<Eigen::VectorXd>& warm_start) {
  if (!(y > 0.0)) throw std::invalid_argument("oracle_max_x: y must be positive");
  if (u < 0.0) throw InfeasibleError("oracle_max_x: budget polytope is empty");
  const double level = 1.0 - inst.amb.eps.value();

  Eigen::VectorXd x = project_budget_box(
      warm_start.value_or(Eigen::VectorXd::Constant(inst.n_facilities(),
                                                    0.5 * inst.capacity)),
      inst.capacity, inst.cost, u);

  double phi_x = phi(inst, x, y);
  if (phi_x <= 1e-12) {
    // Warm start sits outside dom(phi); climb survival(., y) first, then
    // raw phi in case the domain is unreachable under this budget.
    x = ascend_survival(inst, y, u, x, level, 1e-10);
    x = ascend_phi_raw(inst, y, u, x, std::min(eps_k, 1e-8));
    phi_x = phi(inst, x, y);
    if (phi_x <= 1e-12) return x;  // dom(phi) empty within the polytope
  }

  double step = 1.0;
  Eigen::VectorXd prev_x, prev_g;
  int stagnant = 0;
  for (long it = 0; it < kAscentCap; ++it) {
    const double fx = std::max(phi_x, kPhiFloor);
    // Keep the ascent direction finite when phi is still clamped small.
    Eigen::VectorXd g = grad_x_phi(inst, x, y) / std::max(phi_x, 1e-12);
    const double gnorm = g.norm();
    if (!std::isfinite(gnorm)) break;
    if (gnorm > 1e6) g *= 1e6 / gnorm;
    const Eigen::VectorXd xm = project_budget_box(x + g, inst.capacity, inst.cost, u);
    if ((x - xm).norm() <= eps_k) break;

    // Barzilai-Borwein warm start for the line search; concave objective
    // means s.dy < 0 on productive steps.
    double t = std::min(step * 2.0, 1e6);
    if (prev_x.size()) {
      const Eigen::VectorXd s = x - prev_x;
      const double sy = s.dot(g - prev_g);
      if (sy < 0.0) t = std::min(s.squaredNorm() / (-sy), 1e6);
    }
    prev_x = x;
    prev_g = g;

    const double ln_fx = std::log(fx);
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      const Eigen::VectorXd cand =
          project_budget_box(x + t * g, inst.capacity, inst.cost, u);
      const double cand_phi = phi(inst, cand, y);
      const double ln_cand = std::log(std::max(cand_phi, kPhiFloor));
      // A step that leaves dom(phi) is halved like a failed Armijo probe,
      // but only finitely often so boundary iterates cannot stall.
      const bool in_dom = survival(inst, cand, y) >= level - 1e-12;
      if (ln_cand >= ln_fx + 1e-4 * g.dot(cand - x) && (in_dom || halvings >= 8)) {
        stagnant = (ln_cand - ln_fx) < 1e-14 * (1.0 + std::fabs(ln_fx))
                       ? stagnant + 1
                       : 0;
        x = cand;
        phi_x = cand_phi;
        step = t;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted || stagnant >= 3) break;  // no numerical progress left
  }
  return x;
}

std::optional<Eigen::VectorXd> initial_point(const ProductionInstance& inst,
                                             double u,
                                             const std::vector<double>& eps0_sequence) {
  const double target = 1.0 - inst.amb.eps.value();
  const Eigen::VectorXd start = project_budget_box(
      Eigen::VectorXd::Constant(inst.n_facilities(), inst.capacity),
      inst.capacity, inst.cost, u);
  for (const double eps0 : eps0_sequence) {
    if (!(eps0 > 0.0))
      throw std::invalid_argument("initial_point: eps0 ladder must be positive");
    const Eigen::VectorXd x = ascend_survival(inst, eps0, u, start, target, 1e-9);
    if (survival(inst, x, eps0) >= target) return x;
  }
  return std::nullopt;
}

BcaResult bca_rho(const ProductionInstance& raw, double u, BcaOptions opts) {
  const ProductionInstance inst = normalize_rows(raw);
  BcaResult res;
  res.rho = 0.0;

  const auto x1 = initial_point(inst, u);
  if (!x1) {
    res.trace.stop_reason = BcaStop::kInfeasibleStart;
    return res;
  }
  Eigen::VectorXd x = *x1;
  double y = std::max(var_f(inst, x, inst.amb.eps), 0.0);
  res.trace.iterates.push_back({x, y, phi(inst, x, y), opts.eps1});
  res.trace.stop_reason = BcaStop::kIterationCap;

  for (int k = 1; k < opts.max_iters; ++k) {
    const double eps_k = opts.eps1 / k;
    const Eigen::VectorXd xn = oracle_max_x(inst, y, u, eps_k, x);
    const double yn = std::max(var_f(inst, xn, inst.amb.eps), 0.0);
    res.trace.iterates.push_back(
        {xn, yn, phi(inst, xn, yn), opts.eps1 / (k + 1)});
    const bool converged = std::fabs(yn - y) <= opts.y_tol;
    x = xn;
    y = yn;
    if (converged) {
      res.trace.stop_reason = BcaStop::kYConverged;
      break;
    }
  }
  res.rho = res.trace.iterates.back().phi;
  return res;
}

std::vector<std::pair<double, double>> envelope_sweep(
    const ProductionInstance& inst, const std::vector<double>& u_grid,
    BcaOptions opts) {
  for (std::size_t i = 1; i < u_grid.size(); ++i)
    if (u_grid[i] < u_grid[i - 1])
      throw std::invalid_argument("envelope_sweep: budget grid must be nondecreasing");
  std::vector<std::pair<double, double>> rows(u_grid.size());
  detail::parallel_for(u_grid.size(), [&](std::size_t i) {
    rows[i] = {u_grid[i], bca_rho(inst, u_grid[i], opts).rho};
  });
  return rows;
}

MinCostResult min_cost(const ProductionInstance& inst, double delta_target,
                       BcaOptions opts) {
  if (!(delta_target > 0.0))
    throw std::invalid_argument("min_cost: target radius must be positive");
  const double u_hi_full = inst.capacity * inst.cost.sum();

  BcaResult at_hi = bca_rho(inst, u_hi_full, opts);
  if (at_hi.rho < delta_target)
    throw InfeasibleError("min_cost: radius unreachable even at the full budget");
  BcaResult at_lo = bca_rho(inst, 0.0, opts);
  if (at_lo.rho >= delta_target)
    return {0.0, at_lo.trace.iterates.back().x, std::move(at_lo)};

  double u_lo = 0.0, u_hi = u_hi_full;
  BcaResult best = std::move(at_hi);
  const double tol_u = 1e-4 * (u_hi_full - 0.0);
  while (u_hi - u_lo > tol_u) {
    const double mid = 0.5 * (u_lo + u_hi);
    BcaResult run = bca_rho(inst, mid, opts);
    if (run.rho >= delta_target) {
      u_hi = mid;
      best = std::move(run);
    } else {
      u_lo = mid;
    }
  }
  return {u_hi, best.trace.iterates.back().x, std::move(best)};
}

}  // namespace wasscc
