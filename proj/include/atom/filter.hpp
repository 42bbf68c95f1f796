#pragma once

#include <array>

#include "atom/calibration.hpp"
#include "atom/common.hpp"
#include "atom/world.hpp"

namespace atom::filter {

/// Collision-cone barrier around the obstacle's minimum enclosing circle:
///   h(x) = |alpha| - asin(r / d),
/// nonnegative exactly when the heading ray misses the circle.
struct ConeCBF {
  double r = 1.0;  // enclosing radius, > 0
};

/// Controller parameters: class-K gain, Lipschitz constants of the
/// constraint pieces, slack penalty and control limits. Defaults are the
/// vehicle values used throughout the experiments.
struct FilterConfig {
  double kappa_gain = 4.0;     // kappa(h) = kappa_gain * h
  double lip_lfh = 0.0;        // Lipschitz constant of L_f h
  double lip_lgh = 0.40;       // Lipschitz constant of L_g h
  double lip_kh = 4.00;        // Lipschitz constant of kappa(h(.))
  double slack_penalty = 100.0;
  double v_min = 0.0, v_max = 3.0;
  double omega_min = -1.5, omega_max = 1.5;
};

void validate(const FilterConfig& cfg);

struct FilterResult {
  world::Control u_safe{};
  double delta = 0.0;               // slack, >= 0
  double constraint_residual = 0.0; // constraint value at the solution incl. slack
  bool active = false;              // whether the CBF constraint binds
  double margin_used = 0.0;         // the epsilon fed to the solver
};

double cbf_value(const ConeCBF& cbf, const world::RelState& x);

/// L_f h (identically 0 for these dynamics) and L_g h = [dh/dv-coef, dh/domega-coef]:
///   L_g h = [ -cos(a) r / (d sqrt(d^2-r^2)) + sign(a) s sin(a)/d,  sign(a) ],
/// with s = world::kAlphaCouplingSign and sign(0) taken as +1.
struct LieDerivatives {
  double lf_h = 0.0;
  std::array<double, 2> lg_h{0.0, 0.0};
};
LieDerivatives lie_derivatives(const ConeCBF& cbf, const world::RelState& x);

/// Inclusive linspace grid over (d, alpha) for Lipschitz estimation.
/// The default alpha count is even so the grid never lands on the
/// non-differentiable alpha = 0 line.
struct LipschitzGrid {
  double d_min, d_max;
  double alpha_min = -kPi, alpha_max = kPi;
  int n_d = 200, n_alpha = 200;
};

struct LipschitzConstants {
  double lip_lfh = 0.0, lip_lgh = 0.0, lip_kh = 0.0;
};

/// Max over grid points of the central-difference gradient norm of each
/// constraint piece (L_g h aggregated over components by Frobenius norm).
LipschitzConstants estimate_lipschitz(const ConeCBF& cbf, double kappa_gain,
                                      const LipschitzGrid& grid);

/// min 1/2 ||u - u_nom||^2 + p delta^2
/// s.t. L_f h + L_g h u + kappa(h) + delta >= 0, u within limits.
FilterResult solve_cbf_qp(const world::RelState& x_est, const world::Control& u_nom,
                          const ConeCBF& cbf, const FilterConfig& cfg);

/// The adaptive filter: same objective, robustified constraint
///   L_f h + L_g h u - eps (L_lfh + L_kh + L_lgh ||u||) + kappa(h) + delta >= 0
/// with eps = adaptive_margin(artifact, unc). Solution certified against a
/// brute-force grid oracle in the tests.
FilterResult solve_atom_socp(const world::RelState& x_est,
                             const world::Control& u_nom, double unc,
                             const calib::CalibrationArtifact& artifact,
                             const ConeCBF& cbf, const FilterConfig& cfg);

/// The static-margin baseline: identical constraint with eps fixed.
FilterResult solve_mr_cbf(const world::RelState& x_est,
                          const world::Control& u_nom, double static_eps,
                          const ConeCBF& cbf, const FilterConfig& cfg);

/// Shared solver core, exposed for the oracle tests: the robustified
/// problem with an explicit eps (eps = 0 recovers the plain CBF-QP).
FilterResult solve_with_margin(const world::RelState& x_est,
                               const world::Control& u_nom, double eps,
                               const ConeCBF& cbf, const FilterConfig& cfg);

}  // namespace atom::filter
