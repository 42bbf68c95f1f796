#include "atom/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace atom::harness {

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::kCbfQp: return "cbf_qp";
    case FilterKind::kMrCbf: return "mr_cbf";
    case FilterKind::kAtomScod: return "atom_scod";
    case FilterKind::kAtomDeep: return "atom_deep";
  }
  return "?";
}

std::string to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kReach: return "reach";
    case Outcome::kDeadlock: return "deadlock";
    case Outcome::kCollision: return "collision";
  }
  return "?";
}

world::Control nominal_pd(const world::Pose& pose, const world::Vec2& goal,
                          const NominalGains& gains,
                          const filter::FilterConfig& limits, double dt,
                          PdState& state) {
  const double dx = goal.x - pose.x;
  const double dy = goal.y - pose.y;
  const double e_dist = std::hypot(dx, dy);
  if (e_dist < 1e-12)
    throw ContractViolation("nominal_pd: pose coincides with the goal");
  const double e_ang = angle_diff(std::atan2(dy, dx), pose.theta);

  double e_dist_dot = 0.0, e_ang_dot = 0.0;
  if (!state.first) {
    e_dist_dot = (e_dist - state.prev_e_dist) / dt;
    e_ang_dot = wrap_angle(e_ang - state.prev_e_ang) / dt;
  }
  state.first = false;
  state.prev_e_dist = e_dist;
  state.prev_e_ang = e_ang;

  world::Control u;
  u.v = clamp(gains.kp_dist * e_dist + gains.kd_dist * e_dist_dot, limits.v_min,
              limits.v_max);
  u.omega = clamp(gains.kp_ang * e_ang + gains.kd_ang * e_ang_dot,
                  limits.omega_min, limits.omega_max);
  return u;
}

namespace {

// h with a floor marker: states inside the enclosing circle log -pi, below
// the true minimum of h (which is -pi/2).
double h_or_floor(const filter::ConeCBF& cbf, const world::RelState& x) {
  if (x.d <= cbf.r) return -kPi;
  return filter::cbf_value(cbf, x);
}

}  // namespace

TrialRecord run_trial(const TrialSpec& spec, const Models& models) {
  if (spec.dt <= 0.0) throw ContractViolation("run_trial: dt must be > 0");
  if (spec.max_steps < 0) throw ContractViolation("run_trial: negative max_steps");
  if (!models.perceptor) throw ContractViolation("run_trial: missing perceptor");
  if (spec.kind == FilterKind::kAtomScod && !(models.sketch && models.artifact))
    throw ContractViolation("run_trial: SCOD filter needs sketch and artifact");
  if (spec.kind == FilterKind::kAtomDeep && !(models.ensemble && models.artifact))
    throw ContractViolation("run_trial: ensemble filter needs ensemble and artifact");
  const double r = world::min_enclosing_radius(spec.obstacle);
  {
    const double goal_off =
        std::hypot(spec.goal.x - spec.obstacle.center.x,
                   spec.goal.y - spec.obstacle.center.y);
    if (goal_off < 1e-9)
      throw ContractViolation("run_trial: goal coincides with obstacle center");
    if (world::point_inside(spec.obstacle, {spec.start.x, spec.start.y}))
      throw ContractViolation("run_trial: start pose inside the obstacle");
  }

  const filter::ConeCBF cbf{r};
  const int window_steps =
      std::max(1, int(std::lround(spec.stagnation_window / spec.dt)));

  TrialRecord record;
  world::Pose pose = spec.start;
  PdState pd;
  bool engaged = true;
  std::vector<world::Vec2> trail;  // positions, for the stagnation window

  for (int step = 0;; ++step) {
    const world::RelState rel = world::relative_state(pose, spec.obstacle.center);

    // Terminal conditions, evaluated on the pre-action state. Terminal rows
    // are still logged (so the outcome is derivable from the record) but
    // run no perception or filter.
    const bool collided = rel.d <= r;  // absorbing
    const bool reached =
        !collided &&
        std::hypot(spec.goal.x - pose.x, spec.goal.y - pose.y) <= spec.goal_radius;
    const bool timeout = step >= spec.max_steps;
    trail.push_back({pose.x, pose.y});
    bool stagnant = false;
    if (step >= window_steps) {
      const world::Vec2& old = trail[std::size_t(step - window_steps)];
      stagnant = std::hypot(pose.x - old.x, pose.y - old.y) < spec.stagnation_dist;
    }
    const bool terminal = collided || reached || timeout || stagnant;

    StepLog log;
    log.t = double(step) * spec.dt;
    log.pose = pose;
    log.rel = rel;
    log.h_true = h_or_floor(cbf, rel);
    log.engaged = engaged && !terminal;

    const world::Control u_nom =
        nominal_pd(pose, spec.goal, spec.gains, spec.filter, spec.dt, pd);
    log.v_nom = u_nom.v;
    log.omega_nom = u_nom.omega;

    world::Control u = u_nom;
    if (log.engaged) {
      std::vector<double> ranges = world::scan(pose, spec.obstacle, spec.scan_cfg);
      if (spec.corruption)
        ranges = world::corrupt_scan(ranges, *spec.corruption,
                                     derive_seed(spec.seed, std::uint64_t(step)),
                                     spec.scan_cfg.max_range);
      const world::RelState est = perception::predict(
          *models.perceptor, ranges, spec.scan_cfg.max_range, r);
      log.d_est = est.d;
      log.alpha_est = est.alpha;
      log.h_est = filter::cbf_value(cbf, est);

      double unc = 0.0, eps = 0.0;
      if (spec.kind == FilterKind::kAtomScod || spec.kind == FilterKind::kAtomDeep) {
        const Eigen::VectorXd input =
            perception::normalize_scan(ranges, spec.scan_cfg.max_range);
        unc = spec.kind == FilterKind::kAtomScod
                  ? euq::unc_laplace(*models.sketch, *models.perceptor, input)
                  : euq::unc_ensemble(*models.ensemble, input);
        eps = calib::adaptive_margin(*models.artifact, unc);
      } else if (spec.kind == FilterKind::kMrCbf) {
        eps = spec.static_eps;
      }
      log.unc = unc;
      log.eps = eps;

      const filter::FilterResult sol =
          filter::solve_with_margin(est, u_nom, eps, cbf, spec.filter);
      u = sol.u_safe;
      log.delta = sol.delta;
    }
    log.v_safe = u.v;
    log.omega_safe = u.omega;
    record.steps.push_back(log);

    if (terminal) break;

    if (engaged && spec.disengage_after_pass) {
      // Passed: obstacle center behind the goal-ward half-plane, with
      // clearance. Latched for the rest of the trial.
      const double gx = spec.goal.x - pose.x, gy = spec.goal.y - pose.y;
      const double gn = std::hypot(gx, gy);
      const double ox = spec.obstacle.center.x - pose.x;
      const double oy = spec.obstacle.center.y - pose.y;
      if (gn > 1e-12 && (gx * ox + gy * oy) / gn < 0.0 && rel.d > r + 0.5)
        engaged = false;
    }

    pose = world::step_global(pose, u, spec.dt);
  }

  record.outcome = classify_outcome(record, spec);
  return record;
}

Outcome classify_outcome(const TrialRecord& record, const TrialSpec& spec) {
  if (record.steps.empty())
    throw ContractViolation("classify_outcome: empty step log");
  const double r = world::min_enclosing_radius(spec.obstacle);
  for (const StepLog& s : record.steps)
    if (s.rel.d <= r) return Outcome::kCollision;
  const StepLog& last = record.steps.back();
  if (std::hypot(spec.goal.x - last.pose.x, spec.goal.y - last.pose.y) <=
      spec.goal_radius)
    return Outcome::kReach;
  return Outcome::kDeadlock;
}

double coverage(const std::vector<TrialRecord>& records,
                const calib::CalibrationArtifact& artifact, int coordinate) {
  if (coordinate < 0 || coordinate >= artifact.phi_cal.size())
    throw ContractViolation("coverage: coordinate out of range");
  long total = 0, inside = 0;
  for (const TrialRecord& rec : records) {
    for (const StepLog& s : rec.steps) {
      if (!s.engaged) continue;
      ++total;
      const double err = coordinate == 0 ? std::abs(s.d_est - s.rel.d)
                                         : std::abs(s.alpha_est - s.rel.alpha);
      if (calib::in_interval(err, artifact.phi_cal(coordinate), s.unc)) ++inside;
    }
  }
  if (total == 0) throw ContractViolation("coverage: no engaged steps in records");
  return 100.0 * double(inside) / double(total);
}

double auroc(const std::vector<double>& id_scores,
             const std::vector<double>& ood_scores) {
  if (id_scores.empty() || ood_scores.empty())
    throw ContractViolation("auroc: empty score list");
  struct Tagged {
    double score;
    bool ood;
  };
  std::vector<Tagged> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) all.push_back({s, false});
  for (double s : ood_scores) all.push_back({s, true});
  std::sort(all.begin(), all.end(),
            [](const Tagged& a, const Tagged& b) { return a.score < b.score; });

  // Midranks handle ties; the rank-sum identity then gives exactly
  // P(ood > id) + 1/2 P(ood == id).
  double rank_sum_ood = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j + 1 < all.size() && all[j + 1].score == all[i].score) ++j;
    const double midrank = 0.5 * (double(i + 1) + double(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (all[k].ood) rank_sum_ood += midrank;
    i = j + 1;
  }
  const double n_ood = double(ood_scores.size());
  const double n_id = double(id_scores.size());
  return (rank_sum_ood - n_ood * (n_ood + 1.0) / 2.0) / (n_ood * n_id);
}

}  // namespace atom::harness
