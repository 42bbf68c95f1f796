#include "atom/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace atom::calib {

void validate(const CalibrationArtifact& a) {
  if (a.gamma <= 0.0) throw ContractViolation("CalibrationArtifact: gamma <= 0");
  if (a.sigma_unc < 0.0)
    throw ContractViolation("CalibrationArtifact: negative sigma_unc");
  if (a.n_filtered > a.n_cal || a.n_filtered <= 0)
    throw ContractViolation("CalibrationArtifact: bad filtered count");
  for (Eigen::Index j = 0; j < a.phi_cal.size(); ++j)
    if (!(a.phi_cal(j) >= 0.0) || !std::isfinite(a.phi_cal(j)))
      throw ContractViolation("CalibrationArtifact: phi_cal must be finite, >= 0");
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) throw ContractViolation("mean_of: empty input");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / double(xs.size());
}

double population_std(const std::vector<double>& xs) {
  const double mu = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return std::sqrt(s / double(xs.size()));
}

std::vector<int> filter_calibration(const std::vector<double>& scores,
                                    double gamma) {
  if (scores.empty()) throw ContractViolation("filter_calibration: empty scores");
  if (!(gamma > 0.0)) throw ContractViolation("filter_calibration: gamma <= 0");
  const double mu = mean_of(scores);
  std::vector<int> kept;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (std::abs(scores[i] - mu) <= gamma) kept.push_back(int(i));
  if (kept.empty())
    throw EmptyFilterError("filter_calibration: gamma=" + std::to_string(gamma) +
                           " rejected all " + std::to_string(scores.size()) +
                           " samples");
  return kept;
}

Eigen::VectorXd base_error_ratio(const Eigen::MatrixXd& abs_errors,
                                 const std::vector<double>& scores) {
  const Eigen::Index n = abs_errors.rows();
  if (n == 0) throw ContractViolation("base_error_ratio: empty filtered set");
  if (Eigen::Index(scores.size()) != n)
    throw ContractViolation("base_error_ratio: score/error count mismatch");
  for (double s : scores)
    if (s < 1e-12)
      throw DivisionHazardError(
          "base_error_ratio: near-zero uncertainty score survived filtering");
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(abs_errors.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < abs_errors.cols(); ++j)
      phi(j) = std::max(phi(j), abs_errors(i, j) / scores[std::size_t(i)]);
  return phi;
}

double adaptive_margin(const CalibrationArtifact& artifact, double unc) {
  if (unc < 0.0) throw ContractViolation("adaptive_margin: negative score");
  return unc * artifact.phi_cal.norm();
}

double conformal_quantile(const std::vector<double>& scores, double alpha) {
  if (scores.empty()) throw ContractViolation("conformal_quantile: empty scores");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ContractViolation("conformal_quantile: alpha must be in (0, 1)");
  const auto n = double(scores.size());
  const auto rank = std::size_t(std::ceil((n + 1.0) * (1.0 - alpha)));
  if (rank > scores.size())
    throw ContractViolation(
        "conformal_quantile: N too small for the requested miscoverage");
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  return sorted[rank - 1];
}

std::vector<Interval> prediction_interval(const CalibrationArtifact& artifact,
                                          const Eigen::VectorXd& estimate,
                                          double unc) {
  if (unc < 0.0) throw ContractViolation("prediction_interval: negative score");
  if (estimate.size() != artifact.phi_cal.size())
    throw ContractViolation("prediction_interval: estimate dimension mismatch");
  std::vector<Interval> out(std::size_t(estimate.size()));
  for (Eigen::Index j = 0; j < estimate.size(); ++j) {
    const double half = artifact.phi_cal(j) * unc;
    out[std::size_t(j)] = {estimate(j) - half, estimate(j) + half};
  }
  return out;
}

bool in_interval(double abs_error, double phi_j, double unc) {
  if (unc > 0.0) return abs_error / unc <= phi_j;
  return abs_error <= phi_j * unc;  // unc == 0: degenerate interval
}

void save_artifact(const CalibrationArtifact& artifact, const std::string& path,
                   const std::string& provenance) {
  validate(artifact);
  nlohmann::ordered_json j;
  j["format"] = "atom-calibration-v1";
  j["euq_id"] = artifact.euq_id;
  j["mu_unc"] = artifact.mu_unc;
  j["sigma_unc"] = artifact.sigma_unc;
  j["gamma"] = artifact.gamma;
  j["phi_cal"] = std::vector<double>(
      artifact.phi_cal.data(), artifact.phi_cal.data() + artifact.phi_cal.size());
  j["n_cal"] = artifact.n_cal;
  j["n_filtered"] = artifact.n_filtered;
  j["provenance"] = provenance;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

CalibrationArtifact load_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  CalibrationArtifact a;
  a.euq_id = j.at("euq_id").get<std::string>();
  a.mu_unc = j.at("mu_unc").get<double>();
  a.sigma_unc = j.at("sigma_unc").get<double>();
  a.gamma = j.at("gamma").get<double>();
  const auto phi = j.at("phi_cal").get<std::vector<double>>();
  a.phi_cal = Eigen::Map<const Eigen::VectorXd>(phi.data(), Eigen::Index(phi.size()));
  a.n_cal = j.at("n_cal").get<int>();
  a.n_filtered = j.at("n_filtered").get<int>();
  validate(a);
  return a;
}

}  // namespace atom::calib
