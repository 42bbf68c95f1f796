#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "atom/nn.hpp"
#include "atom/world.hpp"

namespace atom::perception {

struct LabeledSample {
  std::vector<double> scan;  // raw ranges, length n_beams
  world::RelState state;     // ground truth at scan time
};

/// Obstacle family + pose sampling ranges for dataset generation. The
/// in-distribution family is small circles (radius 0.1-0.5 m); the
/// out-of-distribution family is large square/triangle/star shapes
/// (size 1.5-2.0 m).
struct ScenarioSpec {
  std::vector<world::Shape> shapes{world::Shape::kCircle};
  double size_lo = 0.1;
  double size_hi = 0.5;
  double annulus_margin = 0.1;  // d sampled in [r + margin, d_max]
  double d_max = 4.0;
  // Relative heading range. Trials only ever run perception while driving
  // toward the obstacle, so the dataset covers |alpha| up to this bound
  // rather than the full circle (the +-pi wrap would otherwise inject
  // label discontinuities the task never encounters).
  double alpha_max = 2.2;
  world::ScanConfig scan_cfg{};
  std::optional<world::CorruptionSpec> corruption;
  std::string tag = "id";
};

ScenarioSpec id_scenario(const world::ScanConfig& scan_cfg);
ScenarioSpec ood_scenario(const world::ScanConfig& scan_cfg);

struct Dataset {
  std::vector<LabeledSample> samples;
  std::string provenance;  // scenario tag + seed, carried into the sidecar
  int n_beams = 0;
  double max_range = 0.0;
};

/// Samples (obstacle, pose) pairs uniformly over the scenario family and
/// the annulus d in [r + margin, d_max], alpha in (-pi, pi], and ray-casts
/// the scan for each. Bit-reproducible for a given (scenario, n, seed).
Dataset generate_dataset(const ScenarioSpec& scenario, int n, std::uint64_t seed);

/// Scans are fed to networks normalized by max_range; every consumer of
/// network inputs (training, prediction, uncertainty scoring) uses this.
Eigen::VectorXd normalize_scan(const std::vector<double>& scan, double max_range);

/// Network input/target matrices (rows = samples, scans normalized).
void to_matrices(const Dataset& data, Eigen::MatrixXd& inputs,
                 Eigen::MatrixXd& targets);

/// Floor applied to the distance estimate: d_hat >= obstacle_radius + this.
inline constexpr double kDistClampMargin = 0.01;

/// Runs the perception map on a raw scan: normalize, forward, then clamp
/// d_hat below at obstacle_radius + kDistClampMargin and wrap alpha_hat.
world::RelState predict(const nn::DenseNet& net, const std::vector<double>& scan,
                        double max_range, double obstacle_radius);

// Dataset file: "ATOMDS1" magic, u64 n_samples, u64 n_beams, f64 max_range,
// then per sample the raw scan followed by (d, alpha); plus a JSON sidecar
// at <path>.json with provenance.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace atom::perception
