#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atom/calibration.hpp"
#include "atom/config.hpp"
#include "atom/euq.hpp"
#include "atom/filter.hpp"
#include "atom/perception.hpp"
#include "atom/world.hpp"

namespace atom::harness {

// ---------------------------------------------------------------------------
// Nominal controller
// ---------------------------------------------------------------------------

/// PD gains of the goal-reaching controller.
struct NominalGains {
  double kp_dist = 0.8, kd_dist = 0.1;
  double kp_ang = 2.5, kd_ang = 0.1;
};

struct PdState {
  bool first = true;
  double prev_e_dist = 0.0, prev_e_ang = 0.0;
};

/// v = clamp(kp_d e_d + kd_d e_d_dot), omega = clamp(kp_a e_th + kd_a e_th_dot)
/// with e_d the distance to the goal and e_th the wrapped heading error to
/// the goal bearing; derivatives by backward difference (zero on the first
/// step). Operates on the ground-truth global pose.
world::Control nominal_pd(const world::Pose& pose, const world::Vec2& goal,
                          const NominalGains& gains, const filter::FilterConfig& limits,
                          double dt, PdState& state);

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

enum class FilterKind { kCbfQp, kMrCbf, kAtomScod, kAtomDeep };
std::string to_string(FilterKind kind);

enum class Outcome { kReach, kDeadlock, kCollision };
std::string to_string(Outcome outcome);

struct TrialSpec {
  world::Obstacle obstacle;
  world::Pose start;
  world::Vec2 goal;
  FilterKind kind = FilterKind::kCbfQp;
  double static_eps = 0.0;  // used by kMrCbf
  double dt = 0.02;
  int max_steps = 2000;
  double goal_radius = 0.3;
  bool disengage_after_pass = true;
  double stagnation_window = 5.0;
  double stagnation_dist = 0.05;
  world::ScanConfig scan_cfg{};
  std::optional<world::CorruptionSpec> corruption;
  filter::FilterConfig filter{};
  NominalGains gains{};
  std::uint64_t seed = 0;  // stream for the (optional) scan corruption
};

struct StepLog {
  double t = 0.0;
  world::Pose pose;
  world::RelState rel;          // ground truth
  double d_est = 0.0, alpha_est = 0.0;
  double unc = 0.0;
  double eps = 0.0;
  double v_nom = 0.0, omega_nom = 0.0;
  double v_safe = 0.0, omega_safe = 0.0;
  double delta = 0.0;
  double h_true = 0.0;  // logged as -pi once the state is inside the circle
  double h_est = 0.0;
  bool engaged = false;
};

struct TrialRecord {
  std::vector<StepLog> steps;  // never empty
  Outcome outcome = Outcome::kDeadlock;
};

/// Pointers to the offline products a trial needs; which ones must be
/// non-null depends on the filter kind.
struct Models {
  const nn::DenseNet* perceptor = nullptr;
  const euq::Ensemble* ensemble = nullptr;        // kAtomDeep
  const euq::LaplaceSketch* sketch = nullptr;     // kAtomScod
  const calib::CalibrationArtifact* artifact = nullptr;  // kAtom*
};

/// Closed-loop run: scan -> predict -> Unc -> margin -> filter -> integrate,
/// with the filter disengaging once the obstacle is passed (center behind
/// the goal-ward half-plane and d > r + 0.5). Deterministic per spec.
TrialRecord run_trial(const TrialSpec& spec, const Models& models);

/// Re-derives the outcome from a completed record: collision if any logged
/// true d <= r (absorbing), else reach if the final position is within the
/// goal radius, else deadlock.
Outcome classify_outcome(const TrialRecord& record, const TrialSpec& spec);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Fraction (percent) of engaged steps whose true state coordinate lies in
/// the adaptive prediction interval around the estimate; coordinate 0 is d,
/// 1 is alpha.
double coverage(const std::vector<TrialRecord>& records,
                const calib::CalibrationArtifact& artifact, int coordinate);

/// Mann-Whitney statistic P(ood > id) + 1/2 P(ood == id), computed exactly
/// via midranks.
double auroc(const std::vector<double>& id_scores,
             const std::vector<double>& ood_scores);

// ---------------------------------------------------------------------------
// Experiment orchestration
// ---------------------------------------------------------------------------

/// Offline products, built once per config and reused by every cell.
struct Artifacts {
  perception::Dataset id_train, id_cal, id_test, ood_eval;
  euq::Ensemble ensemble;              // member 0 doubles as the perceptor
  euq::LaplaceSketch sketch;
  calib::CalibrationArtifact scod;
  calib::CalibrationArtifact deep;
  std::vector<double> scod_cal_scores;  // S_cal, reused by the gamma ablation
  std::vector<double> deep_cal_scores;
  Eigen::MatrixXd cal_abs_errors;      // |q(y_i) - x_i| on the calibration set
  filter::FilterConfig filter;         // effective constants (estimated or verbatim)
};

/// Loads each product from `dir` if present, otherwise builds and saves it.
/// Pass an empty dir to build everything in memory.
Artifacts ensure_artifacts(const Config& cfg, const std::string& dir);

// Individual offline stages (the gen-data / train / fit-euq / calibrate
// subcommands call these).
void stage_gen_data(const Config& cfg, const std::string& dir);
void stage_train(const Config& cfg, const std::string& dir);
void stage_fit_euq(const Config& cfg, const std::string& dir);
void stage_calibrate(const Config& cfg, const std::string& dir);

struct CellSummary {
  std::string name;      // e.g. "ood_atom_scod"
  std::string scenario;  // "id", "ood" or "ood_corrupt"
  FilterKind kind = FilterKind::kCbfQp;
  int trials = 0;
  int reach = 0, deadlock = 0, collision = 0;
  double d_coverage = -1.0, alpha_coverage = -1.0;  // -1 when no EUQ runs
  double auroc = -1.0;
  double min_h_true = 0.0;
  int sound_trials = 0;        // trials with ||e|| <= eps_adapt at every engaged step
  double min_h_sound = 0.0;    // min h over those trials
};

struct ExperimentSummary {
  std::vector<CellSummary> cells;
  std::string config_hash;
};

/// Runs every (scenario x filter) cell, writes per-trial CSV logs, the
/// summary JSON, the results table CSV and the trajectory/time-series SVG
/// figures under `outdir`.
ExperimentSummary run_experiment(const Config& cfg, const std::string& outdir);

struct GammaRow {
  double multiplier = 0.0;
  bool failed = false;        // empty filtered set at this gamma
  double phi_d = 0.0, phi_alpha = 0.0;
  int n_filtered = 0;
  double reach = 0.0, deadlock = 0.0, collision = 0.0;
  double d_coverage = 0.0, alpha_coverage = 0.0;
};

/// Recomputes the SCOD artifact at gamma = k * sigma_unc for each multiplier
/// and re-runs the OoD adaptive cell; writes the ablation table CSV.
std::vector<GammaRow> ablate_gamma(const Config& cfg,
                                   const std::vector<double>& multipliers,
                                   const std::string& outdir);

/// Re-renders the table and figures from logs already under `outdir`.
void write_report(const Config& cfg, const std::string& outdir);

// Serialization helpers shared by the CLI and the tests.
void write_trial_csv(const TrialRecord& record, const std::string& path);
TrialRecord read_trial_csv(const std::string& path);
void write_summary_json(const ExperimentSummary& summary, const Config& cfg,
                        const std::string& path);

}  // namespace atom::harness
