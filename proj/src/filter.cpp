#include "atom/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace atom::filter {

void validate(const FilterConfig& cfg) {
  if (cfg.kappa_gain <= 0.0) throw ConfigError("FilterConfig: kappa_gain <= 0");
  if (cfg.lip_lfh < 0.0 || cfg.lip_lgh < 0.0 || cfg.lip_kh < 0.0)
    throw ConfigError("FilterConfig: negative Lipschitz constant");
  if (cfg.slack_penalty <= 0.0) throw ConfigError("FilterConfig: slack_penalty <= 0");
  if (cfg.v_min > cfg.v_max || cfg.omega_min > cfg.omega_max)
    throw ConfigError("FilterConfig: empty control box");
  for (double c : {cfg.kappa_gain, cfg.lip_lfh, cfg.lip_lgh, cfg.lip_kh,
                   cfg.slack_penalty, cfg.v_min, cfg.v_max, cfg.omega_min,
                   cfg.omega_max})
    if (!std::isfinite(c)) throw ConfigError("FilterConfig: non-finite entry");
}

namespace {

double sign_plus(double a) { return a < 0.0 ? -1.0 : 1.0; }  // sign(0) := +1

}  // namespace

double cbf_value(const ConeCBF& cbf, const world::RelState& x) {
  if (cbf.r <= 0.0) throw ContractViolation("cbf_value: r must be > 0");
  if (x.d <= cbf.r)
    throw DegenerateGeometry("cbf_value: d <= r (estimate inside the enclosing circle)");
  return std::abs(x.alpha) - std::asin(cbf.r / x.d);
}

LieDerivatives lie_derivatives(const ConeCBF& cbf, const world::RelState& x) {
  if (cbf.r <= 0.0) throw ContractViolation("lie_derivatives: r must be > 0");
  if (x.d <= cbf.r) throw DegenerateGeometry("lie_derivatives: d <= r");
  const double dh_dd = cbf.r / (x.d * std::sqrt(x.d * x.d - cbf.r * cbf.r));
  const double dh_da = sign_plus(x.alpha);
  LieDerivatives out;
  out.lf_h = 0.0;  // f vanishes in the relative dynamics
  out.lg_h[0] = -std::cos(x.alpha) * dh_dd +
                dh_da * world::kAlphaCouplingSign * std::sin(x.alpha) / x.d;
  out.lg_h[1] = dh_da;
  return out;
}

LipschitzConstants estimate_lipschitz(const ConeCBF& cbf, double kappa_gain,
                                      const LipschitzGrid& grid) {
  if (grid.n_d < 10 || grid.n_alpha < 10)
    throw ConfigError("estimate_lipschitz: need at least 10 grid points per axis");
  if (grid.d_min <= cbf.r)
    throw ConfigError("estimate_lipschitz: grid must stay at d > r");
  const double fd_step = 1e-5;
  if (grid.d_min - fd_step <= cbf.r)
    throw ConfigError("estimate_lipschitz: d_min too close to r for differencing");

  auto lgh_at = [&](double d, double a) {
    return lie_derivatives(cbf, {d, a}).lg_h;
  };
  auto h_at = [&](double d, double a) { return cbf_value(cbf, {d, a}); };

  LipschitzConstants out;
  for (int i = 0; i < grid.n_d; ++i) {
    const double d = grid.d_min + (grid.d_max - grid.d_min) * double(i) /
                                      double(grid.n_d - 1);
    for (int j = 0; j < grid.n_alpha; ++j) {
      const double a = grid.alpha_min + (grid.alpha_max - grid.alpha_min) *
                                            double(j) / double(grid.n_alpha - 1);
      // L_f h is identically zero; its gradient contributes nothing.
      const auto gp_d = lgh_at(d + fd_step, a);
      const auto gm_d = lgh_at(d - fd_step, a);
      const auto gp_a = lgh_at(d, a + fd_step);
      const auto gm_a = lgh_at(d, a - fd_step);
      double frob_sq = 0.0;
      for (int c = 0; c < 2; ++c) {
        const double dd = (gp_d[std::size_t(c)] - gm_d[std::size_t(c)]) / (2.0 * fd_step);
        const double da = (gp_a[std::size_t(c)] - gm_a[std::size_t(c)]) / (2.0 * fd_step);
        frob_sq += dd * dd + da * da;
      }
      out.lip_lgh = std::max(out.lip_lgh, std::sqrt(frob_sq));

      const double kh_dd =
          kappa_gain * (h_at(d + fd_step, a) - h_at(d - fd_step, a)) / (2.0 * fd_step);
      const double kh_da =
          kappa_gain * (h_at(d, a + fd_step) - h_at(d, a - fd_step)) / (2.0 * fd_step);
      out.lip_kh = std::max(out.lip_kh, std::hypot(kh_dd, kh_da));
    }
  }
  out.lip_lfh = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Solver core
//
// With the slack eliminated analytically (optimal delta = max(0, -c(u)) for
// c(u) = a.u + b0 - beta ||u||), the problem reduces to minimizing the
// convex C^1 function
//   F(u) = 1/2 ||u - u_nom||^2 + p max(0, -c(u))^2
// over the control box. The minimum over the box is the best of: the
// unconstrained 2-D stationary point (found on the dual path below) if it
// lies inside, the four edge minimizers (1-D convex, derivative bisection)
// and the four corners.
// ---------------------------------------------------------------------------

namespace {

struct CoreProblem {
  double a0, a1;   // L_g h
  double b0;       // L_f h + kappa(h) - eps (L_lfh + L_kh)
  double beta;     // eps * L_lgh, >= 0
  double p;        // slack penalty
  double un0, un1; // nominal control
  double lo0, hi0, lo1, hi1;
};

double constraint_value(const CoreProblem& q, double u0, double u1) {
  return q.a0 * u0 + q.a1 * u1 + q.b0 - q.beta * std::hypot(u0, u1);
}

double objective(const CoreProblem& q, double u0, double u1) {
  const double m = std::max(0.0, -constraint_value(q, u0, u1));
  const double d0 = u0 - q.un0, d1 = u1 - q.un1;
  return 0.5 * (d0 * d0 + d1 * d1) + q.p * m * m;
}

// Stationary point of the Lagrangian for multiplier lam: a shrinkage of
// w = u_nom + lam a toward the origin by lam*beta.
void stationary_point(const CoreProblem& q, double lam, double& u0, double& u1) {
  const double w0 = q.un0 + lam * q.a0;
  const double w1 = q.un1 + lam * q.a1;
  const double wn = std::hypot(w0, w1);
  const double t = wn - lam * q.beta;
  if (t <= 0.0 || wn == 0.0) {
    u0 = 0.0;
    u1 = 0.0;
  } else {
    u0 = w0 * (t / wn);
    u1 = w1 * (t / wn);
  }
}

// Unconstrained (box-free) minimizer of F via bisection on the dual
// residual psi(lam) = c(u(lam)) + lam/(2p); any root is a KKT point of the
// convex problem and hence globally optimal.
void solve_free(const CoreProblem& q, double& u0, double& u1) {
  if (constraint_value(q, q.un0, q.un1) >= 0.0) {
    u0 = q.un0;
    u1 = q.un1;
    return;
  }
  auto psi = [&](double lam) {
    double x0, x1;
    stationary_point(q, lam, x0, x1);
    return constraint_value(q, x0, x1) + lam / (2.0 * q.p);
  };
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (psi(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 200) {
      double b0, b1;
      stationary_point(q, hi, b0, b1);
      throw SolverError("safety filter: dual bracketing failed", b0, b1,
                        std::max(0.0, -constraint_value(q, b0, b1)));
    }
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (psi(mid) < 0.0 ? lo : hi) = mid;
  }
  stationary_point(q, 0.5 * (lo + hi), u0, u1);
}

// d/dx of F along one coordinate with the other fixed; F is convex so the
// derivative is nondecreasing and a sign bisection finds the edge minimum.
double edge_derivative(const CoreProblem& q, int coord, double x, double fixed) {
  const double u0 = coord == 0 ? x : fixed;
  const double u1 = coord == 0 ? fixed : x;
  const double c = constraint_value(q, u0, u1);
  const double d_nom = coord == 0 ? x - q.un0 : x - q.un1;
  if (c >= 0.0) return d_nom;
  const double norm = std::hypot(u0, u1);
  const double a_c = coord == 0 ? q.a0 : q.a1;
  const double dc_dx = a_c - (norm > 0.0 ? q.beta * x / norm : 0.0);
  return d_nom + 2.0 * q.p * (-c) * (-dc_dx);
}

double solve_edge(const CoreProblem& q, int coord, double lo, double hi,
                  double fixed) {
  if (edge_derivative(q, coord, lo, fixed) >= 0.0) return lo;
  if (edge_derivative(q, coord, hi, fixed) <= 0.0) return hi;
  for (int it = 0; it < 120; ++it) {
    const double mid = 0.5 * (lo + hi);
    (edge_derivative(q, coord, mid, fixed) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

FilterResult solve_core(const CoreProblem& q, double eps_used) {
  const auto in_box = [&](double u0, double u1) {
    return u0 >= q.lo0 && u0 <= q.hi0 && u1 >= q.lo1 && u1 <= q.hi1;
  };

  double best0 = clamp(q.un0, q.lo0, q.hi0);
  double best1 = clamp(q.un1, q.lo1, q.hi1);
  double best_f = objective(q, best0, best1);
  // The clamped nominal control is optimal whenever it already satisfies
  // the constraint (it minimizes the tracking term on its own).
  if (constraint_value(q, best0, best1) >= 0.0) {
    FilterResult res;
    res.u_safe = {best0, best1};
    res.delta = 0.0;
    res.constraint_residual = constraint_value(q, best0, best1);
    res.active = res.constraint_residual <= 1e-9;
    res.margin_used = eps_used;
    return res;
  }

  auto consider = [&](double u0, double u1) {
    const double f = objective(q, u0, u1);
    if (f < best_f) {
      best_f = f;
      best0 = u0;
      best1 = u1;
    }
  };

  double f0 = 0.0, f1 = 0.0;
  solve_free(q, f0, f1);
  if (in_box(f0, f1)) consider(f0, f1);

  consider(solve_edge(q, 0, q.lo0, q.hi0, q.lo1), q.lo1);  // omega at lower bound
  consider(solve_edge(q, 0, q.lo0, q.hi0, q.hi1), q.hi1);  // omega at upper bound
  consider(q.lo0, solve_edge(q, 1, q.lo1, q.hi1, q.lo0));  // v at lower bound
  consider(q.hi0, solve_edge(q, 1, q.lo1, q.hi1, q.hi0));  // v at upper bound
  consider(q.lo0, q.lo1);
  consider(q.lo0, q.hi1);
  consider(q.hi0, q.lo1);
  consider(q.hi0, q.hi1);

  FilterResult res;
  res.u_safe = {best0, best1};
  const double c = constraint_value(q, best0, best1);
  res.delta = std::max(0.0, -c);
  res.constraint_residual = c + res.delta;
  res.active = c <= 1e-9;
  res.margin_used = eps_used;
  return res;
}

}  // namespace

FilterResult solve_with_margin(const world::RelState& x_est,
                               const world::Control& u_nom, double eps,
                               const ConeCBF& cbf, const FilterConfig& cfg) {
  validate(cfg);
  if (eps < 0.0) throw ContractViolation("safety filter: negative margin");
  const double h = cbf_value(cbf, x_est);
  const LieDerivatives lie = lie_derivatives(cbf, x_est);
  CoreProblem q;
  q.a0 = lie.lg_h[0];
  q.a1 = lie.lg_h[1];
  q.b0 = lie.lf_h + cfg.kappa_gain * h - eps * (cfg.lip_lfh + cfg.lip_kh);
  q.beta = eps * cfg.lip_lgh;
  q.p = cfg.slack_penalty;
  q.un0 = u_nom.v;
  q.un1 = u_nom.omega;
  q.lo0 = cfg.v_min;
  q.hi0 = cfg.v_max;
  q.lo1 = cfg.omega_min;
  q.hi1 = cfg.omega_max;
  return solve_core(q, eps);
}

FilterResult solve_cbf_qp(const world::RelState& x_est, const world::Control& u_nom,
                          const ConeCBF& cbf, const FilterConfig& cfg) {
  return solve_with_margin(x_est, u_nom, 0.0, cbf, cfg);
}

FilterResult solve_atom_socp(const world::RelState& x_est,
                             const world::Control& u_nom, double unc,
                             const calib::CalibrationArtifact& artifact,
                             const ConeCBF& cbf, const FilterConfig& cfg) {
  if (unc < 0.0) throw ContractViolation("solve_atom_socp: negative score");
  const double eps = calib::adaptive_margin(artifact, unc);
  return solve_with_margin(x_est, u_nom, eps, cbf, cfg);
}

FilterResult solve_mr_cbf(const world::RelState& x_est,
                          const world::Control& u_nom, double static_eps,
                          const ConeCBF& cbf, const FilterConfig& cfg) {
  return solve_with_margin(x_est, u_nom, static_eps, cbf, cfg);
}

}  // namespace atom::filter
