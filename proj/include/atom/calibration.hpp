#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "atom/common.hpp"

namespace atom::calib {

/// Offline calibration product consumed online by the adaptive filter:
/// statistics of the calibration uncertainty scores, the filter width
/// gamma, and the per-coordinate base error ratio phi_cal.
struct CalibrationArtifact {
  double mu_unc = 0.0;     // mean of the calibration scores
  double sigma_unc = 0.0;  // population std of the calibration scores
  double gamma = 0.0;      // absolute filter tolerance around the mean
  Eigen::VectorXd phi_cal; // worst-case |error_j| / Unc over the filtered set
  int n_cal = 0;
  int n_filtered = 0;
  std::string euq_id;      // "scod" or "deep"
};

void validate(const CalibrationArtifact& artifact);

double mean_of(const std::vector<double>& xs);
/// Population standard deviation (divides by N).
double population_std(const std::vector<double>& xs);

/// Indices i with |scores[i] - mean(scores)| <= gamma. The mean is taken
/// over ALL scores. Throws EmptyFilterError when nothing survives.
std::vector<int> filter_calibration(const std::vector<double>& scores,
                                    double gamma);

/// Per-coordinate worst-case ratio of absolute estimation error to
/// uncertainty score over the (already filtered) set. `abs_errors` has one
/// row per kept sample, one column per state coordinate; `scores` are the
/// matching Unc values. Scores below 1e-12 are a division hazard: they are
/// exactly what the filtering step exists to exclude.
Eigen::VectorXd base_error_ratio(const Eigen::MatrixXd& abs_errors,
                                 const std::vector<double>& scores);

/// Adaptive perception error margin: eps = || phi_cal * unc ||_2 = unc * ||phi_cal||_2.
double adaptive_margin(const CalibrationArtifact& artifact, double unc);

/// Split-conformal quantile: the ceil((N+1)(1-alpha))-th smallest score.
/// Provided for completeness; the deployed margin path uses the worst-case
/// ratio above, not this quantile.
double conformal_quantile(const std::vector<double>& scores, double alpha);

struct Interval {
  double lo = 0.0, hi = 0.0;
};

/// Per-coordinate adaptive prediction intervals [est_j +- phi_cal_j * unc].
std::vector<Interval> prediction_interval(const CalibrationArtifact& artifact,
                                          const Eigen::VectorXd& estimate,
                                          double unc);

/// Membership test used by the coverage metric. Uses the ratio form
/// |err| / unc <= phi_j so it is float-exact against base_error_ratio
/// (the defining max is attained with the same arithmetic).
bool in_interval(double abs_error, double phi_j, double unc);

void save_artifact(const CalibrationArtifact& artifact, const std::string& path,
                   const std::string& provenance);
CalibrationArtifact load_artifact(const std::string& path);

}  // namespace atom::calib
