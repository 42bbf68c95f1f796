#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "atom/filter.hpp"
#include "oracles.hpp"

using namespace atom;
using filter::ConeCBF;
using filter::FilterConfig;
using filter::FilterResult;
using world::Control;
using world::RelState;

namespace {

RelState random_safe_state(Rng& rng, double r) {
  const double d = rng.uniform(r + 0.1, 8.0);
  double alpha = rng.uniform(-kPi, kPi);
  if (std::abs(alpha) < 0.01) alpha = 0.01;  // keep clear of the |alpha| kink
  return {d, alpha};
}

oracle::SocpInstance instance_for(const RelState& x, const Control& u_nom,
                                  double eps, const ConeCBF& cbf,
                                  const FilterConfig& cfg) {
  const double h = filter::cbf_value(cbf, x);
  const filter::LieDerivatives lie = filter::lie_derivatives(cbf, x);
  oracle::SocpInstance q;
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
  return q;
}

double objective_of(const oracle::SocpInstance& q, const FilterResult& res) {
  const double du0 = res.u_safe.v - q.un0;
  const double du1 = res.u_safe.omega - q.un1;
  const double c = q.a0 * res.u_safe.v + q.a1 * res.u_safe.omega + q.b0 -
                   q.beta * std::hypot(res.u_safe.v, res.u_safe.omega);
  const double slack = c < 0.0 ? -c : 0.0;
  return 0.5 * (du0 * du0 + du1 * du1) + q.p * slack * slack;
}

}  // namespace

TEST_CASE("cbf_value: boundary, quarter cone and pointing-at cases") {
  CHECK(filter::cbf_value({1.0}, {2.0, kPi / 6.0}) == doctest::Approx(0.0));
  CHECK(filter::cbf_value({1.0}, {std::sqrt(2.0), kPi / 2.0}) ==
        doctest::Approx(kPi / 4.0));
  CHECK(filter::cbf_value({1.0}, {3.0, 0.0}) < 0.0);
  CHECK_THROWS_AS(filter::cbf_value({1.0}, {0.9, 0.5}), DegenerateGeometry);
}

TEST_CASE("cbf_value level set matches ray-circle geometry") {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double r = rng.uniform(0.2, 2.0);
    const RelState x{rng.uniform(r + 1e-3, 8.0), rng.uniform(-kPi, kPi)};
    const double h = filter::cbf_value({r}, x);
    // Heading ray from the origin at angle alpha away from the obstacle
    // bearing: it meets the circle of radius r at distance d iff the
    // closest approach (with positive ray parameter) is inside.
    const bool ray_hits =
        std::cos(x.alpha) > 0.0 && x.d * std::abs(std::sin(x.alpha)) < r;
    if (std::abs(h) > 1e-9) CHECK((h < 0.0) == ray_hits);
  }
}

TEST_CASE("lie_derivatives: L_f h vanishes, trig collapse at alpha = pi/2") {
  const ConeCBF cbf{1.0};
  const filter::LieDerivatives lie = filter::lie_derivatives(cbf, {2.5, kPi / 2.0});
  CHECK(lie.lf_h == 0.0);
  CHECK(lie.lg_h[0] == doctest::Approx(world::kAlphaCouplingSign / 2.5));
  CHECK(lie.lg_h[1] == 1.0);
  CHECK(filter::lie_derivatives(cbf, {2.5, -0.3}).lg_h[1] == -1.0);
}

TEST_CASE("lie_derivatives: gradient of h matches finite differences") {
  Rng rng(2);
  const ConeCBF cbf{0.8};
  const double step = 1e-6;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const RelState x = random_safe_state(rng, cbf.r);
    if (std::abs(x.alpha) < 2.0 * step || kPi - std::abs(x.alpha) < 2.0 * step)
      continue;
    const double dh_dd = (filter::cbf_value(cbf, {x.d + step, x.alpha}) -
                          filter::cbf_value(cbf, {x.d - step, x.alpha})) /
                         (2.0 * step);
    const double dh_da = (filter::cbf_value(cbf, {x.d, x.alpha + step}) -
                          filter::cbf_value(cbf, {x.d, x.alpha - step})) /
                         (2.0 * step);
    // Analytic pieces recovered from the Lie derivative components:
    // lg_h = [-cos(a) dh_dd + sign(a) s sin(a)/d, sign(a)].
    const double sign_a = x.alpha < 0.0 ? -1.0 : 1.0;
    const double analytic_dd = cbf.r / (x.d * std::sqrt(x.d * x.d - cbf.r * cbf.r));
    worst = std::max(worst, std::abs(dh_dd - analytic_dd) /
                                std::max(1.0, std::abs(analytic_dd)));
    worst = std::max(worst, std::abs(dh_da - sign_a));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("lie_derivatives match finite differences of h along the flow") {
  Rng rng(3);
  const ConeCBF cbf{0.7};
  const double dt = 1e-6;
  for (int i = 0; i < 2000; ++i) {
    RelState x = random_safe_state(rng, cbf.r);
    if (std::abs(x.alpha) < 1e-3 || kPi - std::abs(x.alpha) < 1e-3) continue;
    const Control u{rng.uniform(0.0, 3.0), rng.uniform(-1.5, 1.5)};
    const auto xdot = world::rel_dynamics(x, u);
    const RelState fwd{x.d + dt * xdot[0], x.alpha + dt * xdot[1]};
    const RelState bwd{x.d - dt * xdot[0], x.alpha - dt * xdot[1]};
    const double h_dot_fd =
        (filter::cbf_value(cbf, fwd) - filter::cbf_value(cbf, bwd)) / (2.0 * dt);
    const filter::LieDerivatives lie = filter::lie_derivatives(cbf, x);
    const double h_dot = lie.lf_h + lie.lg_h[0] * u.v + lie.lg_h[1] * u.omega;
    CHECK(std::abs(h_dot - h_dot_fd) < 1e-4 * std::max(1.0, std::abs(h_dot)));
  }
}

TEST_CASE("estimate_lipschitz: L_f h is zero, kappa scales linearly, grids nest") {
  const ConeCBF cbf{1.0};
  filter::LipschitzGrid coarse{1.3, 6.0, 0.1, kPi, 20, 20};
  const auto base = filter::estimate_lipschitz(cbf, 1.0, coarse);
  CHECK(base.lip_lfh == 0.0);
  CHECK(base.lip_lgh > 0.0);

  const auto scaled = filter::estimate_lipschitz(cbf, 4.0, coarse);
  CHECK(scaled.lip_kh == 4.0 * base.lip_kh);  // exact: power-of-two scaling

  // A nested refinement (2n-1 points reuses every coarse point) can only
  // increase the max.
  filter::LipschitzGrid fine{1.3, 6.0, 0.1, kPi, 39, 39};
  const auto refined = filter::estimate_lipschitz(cbf, 1.0, fine);
  CHECK(refined.lip_kh >= base.lip_kh);
  CHECK(refined.lip_lgh >= base.lip_lgh);

  filter::LipschitzGrid too_coarse{1.3, 6.0, 0.1, kPi, 9, 20};
  CHECK_THROWS_AS(filter::estimate_lipschitz(cbf, 1.0, too_coarse), ConfigError);
}

TEST_CASE("solve_cbf_qp: inactive constraint returns the nominal control") {
  const ConeCBF cbf{1.0};
  FilterConfig cfg;
  // Far away, pointing well off the obstacle: h large, constraint slack.
  const RelState x{6.0, 2.0};
  const Control u_nom{1.0, 0.2};
  const FilterResult res = filter::solve_cbf_qp(x, u_nom, cbf, cfg);
  CHECK(res.u_safe.v == u_nom.v);
  CHECK(res.u_safe.omega == u_nom.omega);
  CHECK(res.delta == 0.0);
  CHECK_FALSE(res.active);
}

TEST_CASE("solve_cbf_qp: matches the grid oracle when the constraint binds") {
  const ConeCBF cbf{1.0};
  FilterConfig cfg;
  const RelState x{1.8, 0.05};  // deep inside the cone
  const Control u_nom{2.0, 0.0};
  const FilterResult res = filter::solve_cbf_qp(x, u_nom, cbf, cfg);
  CHECK(res.active);
  const oracle::SocpInstance q = instance_for(x, u_nom, 0.0, cbf, cfg);
  const auto grid = oracle::grid_socp(q, 1e-3);
  CHECK(std::abs(objective_of(q, res) - grid.objective) <= 1e-3);
  CHECK(res.constraint_residual >= -1e-9);
}

TEST_CASE("solve_cbf_qp: box limits bind and the slack absorbs the residual") {
  const ConeCBF cbf{1.0};
  FilterConfig cfg;
  cfg.slack_penalty = 1e6;  // force the turn command into the limit
  const RelState x{1.2, 0.02};
  const Control u_nom{3.0, 0.0};
  const FilterResult res = filter::solve_cbf_qp(x, u_nom, cbf, cfg);
  CHECK(res.u_safe.omega == doctest::Approx(1.5));  // omega_max
  CHECK(res.delta >= 0.0);
  CHECK(res.constraint_residual >= -1e-9);
}

TEST_CASE("margin zero reduces the adaptive and static filters to the QP") {
  Rng rng(10);
  const ConeCBF cbf{0.9};
  FilterConfig cfg;
  calib::CalibrationArtifact artifact;
  artifact.mu_unc = 1.0;
  artifact.sigma_unc = 0.1;
  artifact.gamma = 0.1;
  artifact.phi_cal = Eigen::Vector2d(0.05, 0.02);
  artifact.n_cal = 10;
  artifact.n_filtered = 10;
  artifact.euq_id = "test";

  for (int i = 0; i < 1000; ++i) {
    const RelState x = random_safe_state(rng, cbf.r);
    const Control u_nom{rng.uniform(0.0, 3.0), rng.uniform(-1.5, 1.5)};
    const FilterResult qp = filter::solve_cbf_qp(x, u_nom, cbf, cfg);
    const FilterResult atom =
        filter::solve_atom_socp(x, u_nom, 0.0, artifact, cbf, cfg);
    const FilterResult mr = filter::solve_mr_cbf(x, u_nom, 0.0, cbf, cfg);
    CHECK(std::abs(qp.u_safe.v - atom.u_safe.v) < 1e-9);
    CHECK(std::abs(qp.u_safe.omega - atom.u_safe.omega) < 1e-9);
    CHECK(std::abs(qp.u_safe.v - mr.u_safe.v) < 1e-9);
    CHECK(std::abs(qp.u_safe.omega - mr.u_safe.omega) < 1e-9);
  }
}

TEST_CASE("solve_mr_cbf: origin feasibility boundary with u_nom = 0") {
  // With u = 0 the constraint reads L_f h + kappa(h) >= eps (L_lfh + L_kh).
  // At equality the filter can sit at the origin with zero slack.
  const ConeCBF cbf{1.0};
  FilterConfig cfg;
  cfg.v_min = -3.0;  // allow the origin to be interior
  const RelState x{2.0, 1.2};
  const double h = filter::cbf_value(cbf, x);
  const double eps = cfg.kappa_gain * h / (cfg.lip_lfh + cfg.lip_kh);
  const FilterResult res = filter::solve_mr_cbf(x, {0.0, 0.0}, eps, cbf, cfg);
  CHECK(res.u_safe.v == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(res.u_safe.omega == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(res.delta == doctest::Approx(0.0));
}

TEST_CASE("solve_mr_cbf: slack is non-decreasing in the static margin") {
  Rng rng(11);
  const ConeCBF cbf{1.1};
  FilterConfig cfg;
  for (int i = 0; i < 100; ++i) {
    const RelState x = random_safe_state(rng, cbf.r);
    const Control u_nom{rng.uniform(0.0, 3.0), rng.uniform(-1.5, 1.5)};
    double prev_delta = -1.0;
    for (double eps : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8}) {
      const FilterResult res = filter::solve_mr_cbf(x, u_nom, eps, cbf, cfg);
      CHECK(res.delta >= prev_delta - 1e-9);
      prev_delta = res.delta;
    }
  }
}

TEST_CASE("solver vs grid oracle on random adaptive instances") {
  Rng rng(12);
  const ConeCBF cbf{1.0};
  FilterConfig cfg;
  int active_count = 0;
  for (int i = 0; i < 60; ++i) {
    const RelState x = random_safe_state(rng, cbf.r);
    const Control u_nom{rng.uniform(0.0, 3.0), rng.uniform(-1.5, 1.5)};
    const double eps = rng.uniform(0.0, 1.2);
    const FilterResult res = filter::solve_with_margin(x, u_nom, eps, cbf, cfg);
    CHECK(res.constraint_residual >= -1e-9);
    CHECK(res.delta >= 0.0);
    CHECK(res.u_safe.v >= cfg.v_min);
    CHECK(res.u_safe.v <= cfg.v_max);
    CHECK(res.u_safe.omega >= cfg.omega_min);
    CHECK(res.u_safe.omega <= cfg.omega_max);
    if (res.active) ++active_count;
    const oracle::SocpInstance q = instance_for(x, u_nom, eps, cbf, cfg);
    const auto grid = oracle::grid_socp(q, 2e-3);
    CHECK(objective_of(q, res) <= grid.objective + 1e-3);
  }
  CHECK(active_count > 0);  // the sample must actually exercise the solver
}
