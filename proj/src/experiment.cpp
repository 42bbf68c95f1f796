#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "atom/harness.hpp"
#include "atom/svg.hpp"

namespace fs = std::filesystem;

namespace atom::harness {

namespace {

constexpr const char* kIdTrain = "datasets/id_train.bin";
constexpr const char* kIdCal = "datasets/id_cal.bin";
constexpr const char* kIdTest = "datasets/id_test.bin";
constexpr const char* kOodEval = "datasets/ood_eval.bin";
constexpr const char* kEnsembleDir = "models/ensemble";
constexpr const char* kSketch = "models/scod_sketch.bin";
constexpr const char* kCalScod = "calibration_scod.json";
constexpr const char* kCalDeep = "calibration_deep.json";

perception::ScenarioSpec id_spec(const Config& cfg) {
  perception::ScenarioSpec s = perception::id_scenario(cfg.scan_config());
  s.annulus_margin = cfg.annulus_margin;
  s.d_max = cfg.d_max;
  s.alpha_max = cfg.alpha_max;
  return s;
}

perception::ScenarioSpec ood_spec(const Config& cfg) {
  perception::ScenarioSpec s = perception::ood_scenario(cfg.scan_config());
  s.annulus_margin = cfg.annulus_margin;
  s.d_max = cfg.d_max;
  s.alpha_max = cfg.alpha_max;
  return s;
}

bool have(const std::string& dir, const char* rel) {
  return !dir.empty() && fs::exists(fs::path(dir) / rel);
}

std::string at(const std::string& dir, const char* rel) {
  return (fs::path(dir) / rel).string();
}

perception::Dataset dataset_stage(const Config& cfg, const std::string& dir,
                                  const char* rel,
                                  const perception::ScenarioSpec& spec, int n,
                                  std::uint64_t seed) {
  if (have(dir, rel)) return perception::load_dataset(at(dir, rel));
  perception::Dataset d = perception::generate_dataset(spec, n, seed);
  if (!dir.empty()) {
    fs::create_directories(fs::path(dir) / "datasets");
    perception::save_dataset(d, at(dir, rel));
  }
  return d;
}

std::vector<int> net_layers(const Config& cfg) {
  return {cfg.n_beams, cfg.hidden1, cfg.hidden2, 2};
}

// Raw network outputs vs ground truth on a dataset; used both for
// calibration errors and perception accuracy summaries. The online clamp
// only ever shrinks the d error, so calibrating on raw outputs is the
// conservative side.
Eigen::MatrixXd abs_errors(const nn::DenseNet& net, const perception::Dataset& data) {
  Eigen::MatrixXd x, y;
  perception::to_matrices(data, x, y);
  const Eigen::MatrixXd pred = nn::forward_batch(net, x);
  return (pred - y).cwiseAbs();
}

std::vector<double> score_dataset_scod(const euq::LaplaceSketch& sketch,
                                       const nn::DenseNet& net,
                                       const perception::Dataset& data) {
  std::vector<double> out;
  out.reserve(data.samples.size());
  for (const auto& s : data.samples)
    out.push_back(euq::unc_laplace(
        sketch, net, perception::normalize_scan(s.scan, data.max_range)));
  return out;
}

std::vector<double> score_dataset_deep(const euq::Ensemble& ens,
                                       const perception::Dataset& data) {
  std::vector<double> out;
  out.reserve(data.samples.size());
  for (const auto& s : data.samples)
    out.push_back(euq::unc_ensemble(
        ens, perception::normalize_scan(s.scan, data.max_range)));
  return out;
}

calib::CalibrationArtifact make_artifact(const std::vector<double>& scores,
                                         const Eigen::MatrixXd& errors,
                                         double gamma_mult,
                                         const std::string& euq_id) {
  calib::CalibrationArtifact a;
  a.mu_unc = calib::mean_of(scores);
  a.sigma_unc = calib::population_std(scores);
  a.gamma = gamma_mult * a.sigma_unc;
  const std::vector<int> kept = calib::filter_calibration(scores, a.gamma);
  Eigen::MatrixXd kept_err(Eigen::Index(kept.size()), errors.cols());
  std::vector<double> kept_scores;
  kept_scores.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    kept_err.row(Eigen::Index(i)) = errors.row(kept[i]);
    kept_scores.push_back(scores[std::size_t(kept[i])]);
  }
  a.phi_cal = calib::base_error_ratio(kept_err, kept_scores);
  a.n_cal = int(scores.size());
  a.n_filtered = int(kept.size());
  a.euq_id = euq_id;
  return a;
}

}  // namespace

void stage_gen_data(const Config& cfg, const std::string& dir) {
  dataset_stage(cfg, dir, kIdTrain, id_spec(cfg), cfg.n_train,
                derive_seed(cfg.seed, 1));
  dataset_stage(cfg, dir, kIdCal, id_spec(cfg), cfg.n_cal, derive_seed(cfg.seed, 2));
  dataset_stage(cfg, dir, kIdTest, id_spec(cfg), cfg.n_test,
                derive_seed(cfg.seed, 3));
  dataset_stage(cfg, dir, kOodEval, ood_spec(cfg), cfg.n_ood_eval,
                derive_seed(cfg.seed, 4));
}

void stage_train(const Config& cfg, const std::string& dir) {
  if (have(dir, kEnsembleDir) &&
      fs::exists(fs::path(dir) / kEnsembleDir / "manifest.json"))
    return;
  const perception::Dataset train = dataset_stage(
      cfg, dir, kIdTrain, id_spec(cfg), cfg.n_train, derive_seed(cfg.seed, 1));
  Eigen::MatrixXd x, y;
  perception::to_matrices(train, x, y);
  euq::Ensemble ens;
  for (int m = 0; m < cfg.ensemble_members; ++m) {
    nn::DenseNet net =
        nn::make_net(net_layers(cfg), derive_seed(cfg.seed, 100 + std::uint64_t(m)));
    nn::TrainConfig tc;
    tc.learning_rate = cfg.learning_rate;
    tc.epochs = cfg.epochs;
    tc.batch_size = std::min(cfg.batch_size, cfg.n_train);
    tc.seed = derive_seed(cfg.seed, 200 + std::uint64_t(m));
    ens.members.push_back(nn::train(net, x, y, tc));
  }
  if (!dir.empty()) euq::save_ensemble(ens, at(dir, kEnsembleDir));
}

void stage_fit_euq(const Config& cfg, const std::string& dir) {
  if (have(dir, kSketch)) return;
  if (dir.empty()) throw ContractViolation("stage_fit_euq: needs a directory");
  stage_train(cfg, dir);
  const euq::Ensemble ens = euq::load_ensemble(at(dir, kEnsembleDir));
  const perception::Dataset train = dataset_stage(
      cfg, dir, kIdTrain, id_spec(cfg), cfg.n_train, derive_seed(cfg.seed, 1));
  Eigen::MatrixXd x, y;
  perception::to_matrices(train, x, y);
  const Eigen::Index n_fisher =
      std::min<Eigen::Index>(x.rows(), cfg.fisher_max_samples);
  const euq::LaplaceSketch sketch = euq::fit_laplace(
      ens.members.front(), x.topRows(n_fisher), cfg.laplace_rank, cfg.prior_scale);
  euq::save_sketch(sketch, at(dir, kSketch));
}

void stage_calibrate(const Config& cfg, const std::string& dir) {
  if (have(dir, kCalScod) && have(dir, kCalDeep)) return;
  stage_fit_euq(cfg, dir);
  const euq::Ensemble ens = euq::load_ensemble(at(dir, kEnsembleDir));
  const euq::LaplaceSketch sketch = euq::load_sketch(at(dir, kSketch));
  const perception::Dataset cal = dataset_stage(
      cfg, dir, kIdCal, id_spec(cfg), cfg.n_cal, derive_seed(cfg.seed, 2));
  const Eigen::MatrixXd errors = abs_errors(ens.members.front(), cal);
  const std::string provenance = "config_hash=" + config_hash(cfg);
  calib::save_artifact(
      make_artifact(score_dataset_scod(sketch, ens.members.front(), cal), errors,
                    cfg.gamma_mult, "scod"),
      at(dir, kCalScod), provenance);
  calib::save_artifact(
      make_artifact(score_dataset_deep(ens, cal), errors, cfg.gamma_mult, "deep"),
      at(dir, kCalDeep), provenance);
}

Artifacts ensure_artifacts(const Config& cfg, const std::string& dir) {
  Artifacts art;
  art.id_train = dataset_stage(cfg, dir, kIdTrain, id_spec(cfg), cfg.n_train,
                               derive_seed(cfg.seed, 1));
  art.id_cal = dataset_stage(cfg, dir, kIdCal, id_spec(cfg), cfg.n_cal,
                             derive_seed(cfg.seed, 2));
  art.id_test = dataset_stage(cfg, dir, kIdTest, id_spec(cfg), cfg.n_test,
                              derive_seed(cfg.seed, 3));
  art.ood_eval = dataset_stage(cfg, dir, kOodEval, ood_spec(cfg), cfg.n_ood_eval,
                               derive_seed(cfg.seed, 4));

  if (!dir.empty()) {
    stage_train(cfg, dir);
    art.ensemble = euq::load_ensemble(at(dir, kEnsembleDir));
    stage_fit_euq(cfg, dir);
    art.sketch = euq::load_sketch(at(dir, kSketch));
  } else {
    Eigen::MatrixXd x, y;
    perception::to_matrices(art.id_train, x, y);
    for (int m = 0; m < cfg.ensemble_members; ++m) {
      nn::DenseNet net = nn::make_net(net_layers(cfg),
                                      derive_seed(cfg.seed, 100 + std::uint64_t(m)));
      nn::TrainConfig tc;
      tc.learning_rate = cfg.learning_rate;
      tc.epochs = cfg.epochs;
      tc.batch_size = std::min(cfg.batch_size, cfg.n_train);
      tc.seed = derive_seed(cfg.seed, 200 + std::uint64_t(m));
      art.ensemble.members.push_back(nn::train(net, x, y, tc));
    }
    const Eigen::Index n_fisher =
        std::min<Eigen::Index>(x.rows(), cfg.fisher_max_samples);
    art.sketch = euq::fit_laplace(art.ensemble.members.front(),
                                  x.topRows(n_fisher), cfg.laplace_rank,
                                  cfg.prior_scale);
  }

  art.cal_abs_errors = abs_errors(art.ensemble.members.front(), art.id_cal);
  art.scod_cal_scores =
      score_dataset_scod(art.sketch, art.ensemble.members.front(), art.id_cal);
  art.deep_cal_scores = score_dataset_deep(art.ensemble, art.id_cal);

  if (have(dir, kCalScod) && have(dir, kCalDeep)) {
    art.scod = calib::load_artifact(at(dir, kCalScod));
    art.deep = calib::load_artifact(at(dir, kCalDeep));
  } else {
    art.scod = make_artifact(art.scod_cal_scores, art.cal_abs_errors,
                             cfg.gamma_mult, "scod");
    art.deep = make_artifact(art.deep_cal_scores, art.cal_abs_errors,
                             cfg.gamma_mult, "deep");
    if (!dir.empty()) {
      const std::string provenance = "config_hash=" + config_hash(cfg);
      calib::save_artifact(art.scod, at(dir, kCalScod), provenance);
      calib::save_artifact(art.deep, at(dir, kCalDeep), provenance);
    }
  }

  art.filter = cfg.filter;
  if (cfg.use_estimated_lipschitz) {
    // Reference radius 1.0; the grid mirrors the sampled-gradient approach
    // with a documented, reproducible domain.
    const filter::ConeCBF ref{1.0};
    filter::LipschitzGrid grid{ref.r + 0.05, cfg.d_max};
    const filter::LipschitzConstants est =
        filter::estimate_lipschitz(ref, cfg.filter.kappa_gain, grid);
    art.filter.lip_lfh = est.lip_lfh;
    art.filter.lip_lgh = est.lip_lgh;
    art.filter.lip_kh = est.lip_kh;
  }
  return art;
}

// ---------------------------------------------------------------------------
// Cells
// ---------------------------------------------------------------------------

namespace {

struct CellDef {
  std::string name;
  std::string scenario;  // "id", "ood", "ood_corrupt"
  FilterKind kind;
};

std::vector<CellDef> cell_defs(const Config& cfg) {
  std::vector<CellDef> cells = {
      {"id_cbf_qp", "id", FilterKind::kCbfQp},
      {"ood_cbf_qp", "ood", FilterKind::kCbfQp},
      {"ood_atom_scod", "ood", FilterKind::kAtomScod},
      {"ood_atom_deep", "ood", FilterKind::kAtomDeep},
  };
  if (cfg.include_corrupt_cells) {
    cells.push_back({"corrupt_cbf_qp", "ood_corrupt", FilterKind::kCbfQp});
    cells.push_back({"corrupt_atom_scod", "ood_corrupt", FilterKind::kAtomScod});
    cells.push_back({"corrupt_atom_deep", "ood_corrupt", FilterKind::kAtomDeep});
  }
  return cells;
}

std::uint64_t name_hash(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Samples the obstacle, start pose and goal for one trial. Start poses sit
// on an arc facing the obstacle, heading offset just outside the collision
// cone (so h(x(0)) > 0), with the goal straight behind the obstacle; the
// nominal controller then drives through the cone and forces the filter to
// intervene.
TrialSpec sample_trial(const Config& cfg, const std::string& scenario,
                       FilterKind kind, std::uint64_t seed) {
  Rng rng(seed);
  TrialSpec spec;
  spec.kind = kind;
  spec.dt = cfg.dt;
  spec.max_steps = cfg.max_steps;
  spec.goal_radius = cfg.goal_radius;
  spec.disengage_after_pass = cfg.disengage_after_pass;
  spec.stagnation_window = cfg.stagnation_window;
  spec.stagnation_dist = cfg.stagnation_dist;
  spec.scan_cfg = cfg.scan_config();
  spec.filter = cfg.filter;
  spec.seed = derive_seed(seed, 77);

  const bool id_family = scenario == "id";
  if (scenario == "ood_corrupt")
    spec.corruption =
        world::CorruptionSpec{cfg.corrupt_gain, cfg.corrupt_bias, cfg.corrupt_noise};

  world::Obstacle obs;
  if (id_family) {
    obs.shape = world::Shape::kCircle;
    obs.size = rng.uniform(0.1, 0.5);
  } else {
    const world::Shape shapes[3] = {world::Shape::kSquare, world::Shape::kTriangle,
                                    world::Shape::kStar};
    obs.shape = shapes[rng.uniform_index(3)];
    obs.size = rng.uniform(1.5, 2.0);
  }
  obs.orientation = rng.uniform(0.0, kTwoPi);
  obs.center = {0.0, 0.0};
  spec.obstacle = obs;
  const double r = world::min_enclosing_radius(obs);

  const double d0 = rng.uniform(cfg.start_d_lo, cfg.start_d_hi);
  const double psi = rng.uniform(-kPi, kPi);
  const double back = rng.uniform(cfg.goal_back_lo, cfg.goal_back_hi);
  const double pad =
      rng.uniform(cfg.start_alpha_pad_lo, cfg.start_alpha_pad_hi);
  const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;

  spec.start.x = d0 * std::cos(psi);
  spec.start.y = d0 * std::sin(psi);
  const double bearing = std::atan2(-spec.start.y, -spec.start.x);
  spec.start.theta = wrap_angle(bearing + side * (std::asin(r / d0) + pad));
  spec.goal = {-back * std::cos(psi), -back * std::sin(psi)};
  return spec;
}

struct CellRun {
  CellSummary summary;
  std::vector<TrialRecord> records;
};

CellRun run_cell(const Config& cfg, const Artifacts& art, const CellDef& def,
                 const std::string& outdir) {
  Models models;
  models.perceptor = &art.ensemble.members.front();
  models.ensemble = &art.ensemble;
  models.sketch = &art.sketch;
  models.artifact = def.kind == FilterKind::kAtomDeep ? &art.deep
                    : def.kind == FilterKind::kAtomScod ? &art.scod
                                                        : nullptr;

  CellRun run;
  run.records.resize(std::size_t(cfg.trials));
  const std::uint64_t cell_seed = derive_seed(cfg.seed, name_hash(def.name));

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int i = next.fetch_add(1); i < cfg.trials; i = next.fetch_add(1)) {
      TrialSpec spec =
          sample_trial(cfg, def.scenario, def.kind, derive_seed(cell_seed, i));
      spec.filter = art.filter;
      run.records[std::size_t(i)] = run_trial(spec, models);
    }
  };
  if (cfg.parallel > 1) {
    std::vector<std::thread> pool;
    for (int w = 0; w < cfg.parallel; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  } else {
    worker();
  }

  CellSummary& s = run.summary;
  s.name = def.name;
  s.scenario = def.scenario;
  s.kind = def.kind;
  s.trials = cfg.trials;
  s.min_h_true = std::numeric_limits<double>::infinity();
  s.min_h_sound = std::numeric_limits<double>::infinity();
  std::vector<double> unc_stream;
  for (const TrialRecord& rec : run.records) {
    switch (rec.outcome) {
      case Outcome::kReach: ++s.reach; break;
      case Outcome::kDeadlock: ++s.deadlock; break;
      case Outcome::kCollision: ++s.collision; break;
    }
    bool sound = true;
    double trial_min_h = std::numeric_limits<double>::infinity();
    for (const StepLog& st : rec.steps) {
      trial_min_h = std::min(trial_min_h, st.h_true);
      if (st.engaged) {
        if (models.artifact) unc_stream.push_back(st.unc);
        const double err_norm =
            std::hypot(st.d_est - st.rel.d, st.alpha_est - st.rel.alpha);
        if (err_norm > st.eps) sound = false;
      }
    }
    s.min_h_true = std::min(s.min_h_true, trial_min_h);
    if (models.artifact && sound) {
      ++s.sound_trials;
      s.min_h_sound = std::min(s.min_h_sound, trial_min_h);
    }
  }
  if (models.artifact) {
    s.d_coverage = coverage(run.records, *models.artifact, 0);
    s.alpha_coverage = coverage(run.records, *models.artifact, 1);
    const std::vector<double>& id_scores = def.kind == FilterKind::kAtomDeep
                                               ? art.deep_cal_scores
                                               : art.scod_cal_scores;
    if (!unc_stream.empty()) s.auroc = auroc(id_scores, unc_stream);
  }

  if (!outdir.empty()) {
    const fs::path cell_dir = fs::path(outdir) / "trials" / def.name;
    fs::create_directories(cell_dir);
    for (int i = 0; i < cfg.trials; ++i)
      write_trial_csv(run.records[std::size_t(i)],
                      (cell_dir / ("trial_" + std::to_string(i) + ".csv")).string());
  }
  return run;
}

std::string pct(double num, double den) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", den > 0.0 ? 100.0 * num / den : 0.0);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_table1(const std::vector<CellSummary>& cells, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "metric";
  for (const auto& c : cells) out << "," << c.name;
  out << "\n";
  auto row = [&](const char* name, auto getter) {
    out << name;
    for (const auto& c : cells) out << "," << getter(c);
    out << "\n";
  };
  row("reach_pct", [](const CellSummary& c) {
    return pct(double(c.reach), double(c.trials));
  });
  row("deadlock_pct", [](const CellSummary& c) {
    return pct(double(c.deadlock), double(c.trials));
  });
  row("collision_pct", [](const CellSummary& c) {
    return pct(double(c.collision), double(c.trials));
  });
  row("d_coverage_pct", [](const CellSummary& c) {
    return c.d_coverage < 0.0 ? std::string("-") : fixed(c.d_coverage, 2);
  });
  row("alpha_coverage_pct", [](const CellSummary& c) {
    return c.alpha_coverage < 0.0 ? std::string("-") : fixed(c.alpha_coverage, 2);
  });
  row("auroc", [](const CellSummary& c) {
    return c.auroc < 0.0 ? std::string("-") : fixed(c.auroc, 4);
  });
}

std::vector<svg::Point> trajectory_points(const TrialRecord& rec) {
  std::vector<svg::Point> pts;
  pts.reserve(rec.steps.size());
  for (const StepLog& s : rec.steps) pts.push_back({s.pose.x, s.pose.y});
  return pts;
}

void write_showcase_figure(const TrialSpec& base,
                           const std::map<std::string, TrialRecord>& runs,
                           const calib::CalibrationArtifact& scod,
                           const std::string& path) {
  const std::map<std::string, std::string> colors = {
      {"cbf_qp", "#d62728"}, {"atom_scod", "#2ca02c"}, {"atom_deep", "#9467bd"}};

  svg::Figure fig(3);
  svg::Panel& traj = fig.panel(0);
  traj.set_title("trajectories");
  for (const auto& [name, rec] : runs) traj.expand_to(trajectory_points(rec));
  traj.expand_to({{base.goal.x, base.goal.y}, {base.start.x, base.start.y}});
  const double r = world::min_enclosing_radius(base.obstacle);
  traj.expand_to({{base.obstacle.center.x - r, base.obstacle.center.y - r},
                  {base.obstacle.center.x + r, base.obstacle.center.y + r}});
  if (base.obstacle.shape != world::Shape::kCircle) {
    std::vector<svg::Point> poly;
    for (const auto& v : world::polygon_vertices(base.obstacle))
      poly.push_back({v.x, v.y});
    traj.polygon(poly, "#555555", 0.6);
  } else {
    traj.circle({base.obstacle.center.x, base.obstacle.center.y},
                base.obstacle.size, "none", "#555555", 0.6);
  }
  traj.circle({base.obstacle.center.x, base.obstacle.center.y}, r, "#333333",
              "none");
  traj.marker({base.start.x, base.start.y}, "#1f77b4");
  traj.marker({base.goal.x, base.goal.y}, "#ff7f0e");
  std::vector<std::pair<std::string, std::string>> legend;
  for (const auto& [name, rec] : runs) {
    traj.polyline(trajectory_points(rec), colors.at(name), 1.8);
    legend.push_back({name, colors.at(name)});
  }
  traj.legend(legend);

  const TrialRecord& scod_rec = runs.at("atom_scod");
  svg::Panel& alpha = fig.panel(1);
  alpha.set_title("alpha: true vs estimate with interval");
  std::vector<svg::Point> a_true, a_est, band;
  for (const StepLog& s : scod_rec.steps) {
    a_true.push_back({s.t, s.rel.alpha});
    if (s.engaged) a_est.push_back({s.t, s.alpha_est});
  }
  for (const StepLog& s : scod_rec.steps)
    if (s.engaged) band.push_back({s.t, s.alpha_est + scod.phi_cal(1) * s.unc});
  for (auto it = scod_rec.steps.rbegin(); it != scod_rec.steps.rend(); ++it)
    if (it->engaged) band.push_back({it->t, it->alpha_est - scod.phi_cal(1) * it->unc});
  alpha.expand_to(a_true);
  alpha.expand_to(band);
  alpha.polygon(band, "#2ca02c", 0.25);
  alpha.polyline(a_true, "#1f77b4", 1.6);
  alpha.polyline(a_est, "#2ca02c", 1.6);
  alpha.legend({{"true", "#1f77b4"}, {"estimate + PI", "#2ca02c"}});

  svg::Panel& hpanel = fig.panel(2);
  hpanel.set_title("h(x) true vs h(x_est)");
  std::vector<svg::Point> h_true, h_est;
  for (const StepLog& s : scod_rec.steps) {
    h_true.push_back({s.t, s.h_true});
    if (s.engaged) h_est.push_back({s.t, s.h_est});
  }
  hpanel.expand_to(h_true);
  hpanel.expand_to(h_est);
  hpanel.polyline(h_true, "#1f77b4", 1.6);
  hpanel.polyline(h_est, "#2ca02c", 1.6);
  hpanel.hline(0.0, "#888888");
  hpanel.legend({{"h(x)", "#1f77b4"}, {"h(x_est)", "#2ca02c"}});

  fig.save(path);
}

}  // namespace

ExperimentSummary run_experiment(const Config& cfg, const std::string& outdir) {
  if (!outdir.empty()) fs::create_directories(outdir);
  const Artifacts art = ensure_artifacts(cfg, outdir);

  ExperimentSummary summary;
  summary.config_hash = config_hash(cfg);
  for (const CellDef& def : cell_defs(cfg)) {
    CellRun run = run_cell(cfg, art, def, outdir);
    summary.cells.push_back(run.summary);
  }

  if (!outdir.empty()) {
    write_summary_json(summary, cfg, (fs::path(outdir) / "summary.json").string());
    write_table1(summary.cells, (fs::path(outdir) / "table1.csv").string());

    // Showcase run (one OoD scenario, all three filters) for the figures.
    Models models;
    models.perceptor = &art.ensemble.members.front();
    models.ensemble = &art.ensemble;
    models.sketch = &art.sketch;
    const std::uint64_t show_seed =
        derive_seed(derive_seed(cfg.seed, name_hash("showcase")), 0);
    std::map<std::string, TrialRecord> runs;
    TrialSpec base = sample_trial(cfg, "ood", FilterKind::kCbfQp, show_seed);
    base.filter = art.filter;
    const fs::path show_dir = fs::path(outdir) / "showcase";
    fs::create_directories(show_dir);
    for (const auto& [kind, artifact] :
         std::vector<std::pair<FilterKind, const calib::CalibrationArtifact*>>{
             {FilterKind::kCbfQp, nullptr},
             {FilterKind::kAtomScod, &art.scod},
             {FilterKind::kAtomDeep, &art.deep}}) {
      TrialSpec spec = base;
      spec.kind = kind;
      Models m = models;
      m.artifact = artifact;
      TrialRecord rec = run_trial(spec, m);
      write_trial_csv(rec, (show_dir / (to_string(kind) + ".csv")).string());
      runs[to_string(kind)] = std::move(rec);
    }
    write_showcase_figure(base, runs, art.scod,
                          (fs::path(outdir) / "fig_showcase.svg").string());
  }
  return summary;
}

std::vector<GammaRow> ablate_gamma(const Config& cfg,
                                   const std::vector<double>& multipliers,
                                   const std::string& outdir) {
  for (double m : multipliers)
    if (m <= 0.0) throw ContractViolation("ablate_gamma: multipliers must be > 0");
  if (!outdir.empty()) fs::create_directories(outdir);
  const Artifacts art = ensure_artifacts(cfg, outdir);

  std::vector<GammaRow> rows;
  for (double mult : multipliers) {
    GammaRow row;
    row.multiplier = mult;
    calib::CalibrationArtifact variant;
    try {
      variant = make_artifact(art.scod_cal_scores, art.cal_abs_errors, mult, "scod");
    } catch (const EmptyFilterError&) {
      row.failed = true;
      rows.push_back(row);
      continue;
    }
    row.phi_d = variant.phi_cal(0);
    row.phi_alpha = variant.phi_cal(1);
    row.n_filtered = variant.n_filtered;

    Artifacts variant_art = art;  // shares models; swaps the artifact
    variant_art.scod = variant;
    const CellDef def{"ood_atom_scod_gamma", "ood", FilterKind::kAtomScod};
    CellRun run = run_cell(cfg, variant_art, def, "");
    row.reach = 100.0 * double(run.summary.reach) / double(run.summary.trials);
    row.deadlock = 100.0 * double(run.summary.deadlock) / double(run.summary.trials);
    row.collision =
        100.0 * double(run.summary.collision) / double(run.summary.trials);
    row.d_coverage = run.summary.d_coverage;
    row.alpha_coverage = run.summary.alpha_coverage;
    rows.push_back(row);
  }

  if (!outdir.empty()) {
    std::ofstream out(fs::path(outdir) / "table2.csv", std::ios::trunc);
    out << "gamma_mult,phi_d,phi_alpha,n_filtered,reach_pct,deadlock_pct,"
           "collision_pct,d_coverage_pct,alpha_coverage_pct,status\n";
    for (const GammaRow& r : rows) {
      if (r.failed) {
        out << fixed(r.multiplier, 2) << ",,,,,,,,,empty_filter\n";
        continue;
      }
      out << fixed(r.multiplier, 2) << "," << fixed(r.phi_d, 6) << ","
          << fixed(r.phi_alpha, 6) << "," << r.n_filtered << ","
          << fixed(r.reach, 2) << "," << fixed(r.deadlock, 2) << ","
          << fixed(r.collision, 2) << "," << fixed(r.d_coverage, 2) << ","
          << fixed(r.alpha_coverage, 2) << ",ok\n";
    }
  }
  return rows;
}

void write_report(const Config& cfg, const std::string& outdir) {
  std::ifstream in(fs::path(outdir) / "summary.json");
  if (!in)
    throw std::runtime_error("write_report: no summary.json under " + outdir);
  const nlohmann::json j = nlohmann::json::parse(in);
  std::vector<CellSummary> cells;
  for (const auto& c : j.at("cells")) {
    CellSummary s;
    s.name = c.at("name").get<std::string>();
    s.trials = c.at("trials").get<int>();
    s.reach = c.at("reach").get<int>();
    s.deadlock = c.at("deadlock").get<int>();
    s.collision = c.at("collision").get<int>();
    s.d_coverage = c.at("d_coverage_pct").get<double>();
    s.alpha_coverage = c.at("alpha_coverage_pct").get<double>();
    s.auroc = c.at("auroc").get<double>();
    cells.push_back(s);
  }
  write_table1(cells, (fs::path(outdir) / "table1.csv").string());
  std::printf("%-18s %8s %9s %10s %8s\n", "cell", "reach%", "deadlock%",
              "collision%", "auroc");
  for (const auto& c : cells)
    std::printf("%-18s %8.2f %9.2f %10.2f %8s\n", c.name.c_str(),
                100.0 * c.reach / c.trials, 100.0 * c.deadlock / c.trials,
                100.0 * c.collision / c.trials,
                c.auroc < 0 ? "-" : fixed(c.auroc, 4).c_str());
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void write_trial_csv(const TrialRecord& record, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "step,t,x,y,theta,d_true,alpha_true,d_est,alpha_est,unc,eps,"
         "v_nom,omega_nom,v_safe,omega_safe,delta,h_true,h_est,engaged\n";
  char buf[640];
  for (std::size_t i = 0; i < record.steps.size(); ++i) {
    const StepLog& s = record.steps[i];
    std::snprintf(buf, sizeof buf,
                  "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                  i, s.t, s.pose.x, s.pose.y, s.pose.theta, s.rel.d, s.rel.alpha,
                  s.d_est, s.alpha_est, s.unc, s.eps, s.v_nom, s.omega_nom,
                  s.v_safe, s.omega_safe, s.delta, s.h_true, s.h_est,
                  s.engaged ? 1 : 0);
    out << buf;
  }
  out << "# outcome," << to_string(record.outcome) << "\n";
}

TrialRecord read_trial_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  TrialRecord rec;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# outcome,", 0) == 0) {
      const std::string o = line.substr(10);
      rec.outcome = o == "reach" ? Outcome::kReach
                    : o == "collision" ? Outcome::kCollision
                                       : Outcome::kDeadlock;
      continue;
    }
    StepLog s;
    std::size_t idx;
    int engaged;
    const int got = std::sscanf(
        line.c_str(),
        "%zu,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,%lg,"
        "%lg,%d",
        &idx, &s.t, &s.pose.x, &s.pose.y, &s.pose.theta, &s.rel.d, &s.rel.alpha,
        &s.d_est, &s.alpha_est, &s.unc, &s.eps, &s.v_nom, &s.omega_nom,
        &s.v_safe, &s.omega_safe, &s.delta, &s.h_true, &s.h_est, &engaged);
    if (got != 19) throw std::runtime_error("malformed trial CSV line in " + path);
    s.engaged = engaged != 0;
    rec.steps.push_back(s);
  }
  if (rec.steps.empty()) throw std::runtime_error("empty trial CSV: " + path);
  return rec;
}

void write_summary_json(const ExperimentSummary& summary, const Config& cfg,
                        const std::string& path) {
  nlohmann::ordered_json j;
  j["format"] = "atom-summary-v1";
  j["config_hash"] = summary.config_hash;
  j["seed"] = cfg.seed;
  j["trials_per_cell"] = cfg.trials;
  j["cells"] = nlohmann::ordered_json::array();
  for (const CellSummary& c : summary.cells) {
    nlohmann::ordered_json cj;
    cj["name"] = c.name;
    cj["scenario"] = c.scenario;
    cj["filter"] = to_string(c.kind);
    cj["trials"] = c.trials;
    cj["reach"] = c.reach;
    cj["deadlock"] = c.deadlock;
    cj["collision"] = c.collision;
    cj["reach_pct"] = 100.0 * double(c.reach) / double(c.trials);
    cj["deadlock_pct"] = 100.0 * double(c.deadlock) / double(c.trials);
    cj["collision_pct"] = 100.0 * double(c.collision) / double(c.trials);
    cj["d_coverage_pct"] = c.d_coverage;
    cj["alpha_coverage_pct"] = c.alpha_coverage;
    cj["auroc"] = c.auroc;
    cj["min_h_true"] = c.min_h_true;
    cj["sound_trials"] = c.sound_trials;
    cj["min_h_sound"] =
        std::isfinite(c.min_h_sound) ? c.min_h_sound : 0.0;
    j["cells"].push_back(cj);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace atom::harness
