#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "atom/calibration.hpp"

using namespace atom;
using calib::CalibrationArtifact;

namespace {

CalibrationArtifact artifact_with_phi(double phi_d, double phi_alpha) {
  CalibrationArtifact a;
  a.mu_unc = 1.0;
  a.sigma_unc = 0.5;
  a.gamma = 0.5;
  a.phi_cal = Eigen::Vector2d(phi_d, phi_alpha);
  a.n_cal = 10;
  a.n_filtered = 8;
  a.euq_id = "test";
  return a;
}

}  // namespace

TEST_CASE("filter_calibration: drops the outlier in the hand example") {
  const std::vector<double> scores = {1.0, 2.0, 3.0, 10.0};
  // mu = 4, population sigma = sqrt(12.5) ~ 3.536
  const double sigma = calib::population_std(scores);
  CHECK(sigma == doctest::Approx(std::sqrt(12.5)));
  const std::vector<int> kept = calib::filter_calibration(scores, sigma);
  CHECK(kept == std::vector<int>{0, 1, 2});
}

TEST_CASE("filter_calibration: infinite gamma keeps everything") {
  const std::vector<double> scores = {5.0, 1.0, 9.0, 2.5};
  const auto kept =
      calib::filter_calibration(scores, std::numeric_limits<double>::infinity());
  CHECK(kept.size() == scores.size());
}

TEST_CASE("filter_calibration: constant scores keep everything for any gamma") {
  const std::vector<double> scores(20, 3.25);
  CHECK(calib::filter_calibration(scores, 1e-9).size() == 20);
}

TEST_CASE("filter_calibration: empty result is an explicit error") {
  // Scores split symmetrically around the mean, all farther than gamma.
  const std::vector<double> scores = {0.0, 10.0};
  CHECK_THROWS_AS(calib::filter_calibration(scores, 1.0), EmptyFilterError);
}

TEST_CASE("filter_calibration: gamma monotonicity gives nested kept sets") {
  Rng rng(5);
  std::vector<double> scores;
  for (int i = 0; i < 300; ++i) scores.push_back(rng.uniform(0.0, 4.0));
  const double sigma = calib::population_std(scores);
  std::vector<int> prev;
  for (double mult : {1.0, 2.0, 4.0, 5.0}) {
    const auto kept = calib::filter_calibration(scores, mult * sigma);
    CHECK(std::includes(kept.begin(), kept.end(), prev.begin(), prev.end()));
    prev = kept;
  }
}

TEST_CASE("filter_calibration: Chebyshev keep fraction at k sigma") {
  Rng rng(17);
  std::vector<double> scores;
  for (int i = 0; i < 2000; ++i)
    scores.push_back(rng.normal() * 2.0 + rng.uniform(0.0, 0.5));
  const double sigma = calib::population_std(scores);
  for (double k : {1.0, 2.0, 4.0}) {
    const auto kept = calib::filter_calibration(scores, k * sigma);
    CHECK(double(kept.size()) / double(scores.size()) >= 1.0 - 1.0 / (k * k));
  }
}

TEST_CASE("base_error_ratio: element-wise max by hand") {
  Eigen::MatrixXd errors(2, 2);
  errors << 0.2, 0.1,   // at Unc 2 -> ratios [0.1, 0.05]
      0.3, 0.05;        // at Unc 3 -> ratios [0.1, 0.0167]
  const Eigen::VectorXd phi = calib::base_error_ratio(errors, {2.0, 3.0});
  CHECK(phi(0) == doctest::Approx(0.1));
  CHECK(phi(1) == doctest::Approx(0.05));
}

TEST_CASE("base_error_ratio: zero error gives zero phi") {
  const Eigen::VectorXd phi =
      calib::base_error_ratio(Eigen::MatrixXd::Zero(1, 2), {1.5});
  CHECK(phi(0) == 0.0);
  CHECK(phi(1) == 0.0);
}

TEST_CASE("base_error_ratio: homogeneous in the scores") {
  Rng rng(9);
  Eigen::MatrixXd errors = Eigen::MatrixXd::Random(12, 2).cwiseAbs();
  std::vector<double> scores, scaled;
  const double c = 3.7;
  for (int i = 0; i < 12; ++i) {
    scores.push_back(rng.uniform(0.5, 2.0));
    scaled.push_back(scores.back() * c);
  }
  const Eigen::VectorXd phi = calib::base_error_ratio(errors, scores);
  const Eigen::VectorXd phi_scaled = calib::base_error_ratio(errors, scaled);
  CHECK(phi_scaled(0) == doctest::Approx(phi(0) / c));
  CHECK(phi_scaled(1) == doctest::Approx(phi(1) / c));
}

TEST_CASE("base_error_ratio: near-zero score is a division hazard") {
  Eigen::MatrixXd errors(1, 2);
  errors << 0.1, 0.1;
  CHECK_THROWS_AS(calib::base_error_ratio(errors, {1e-13}), DivisionHazardError);
}

TEST_CASE("adaptive_margin: reproduces the reported statistics") {
  // phi and mu from the vehicle calibration table; the margin follows by
  // hand arithmetic.
  CalibrationArtifact a = artifact_with_phi(3.690e-2, 1.777e-2);
  CHECK(calib::adaptive_margin(a, 4.2794) == doctest::Approx(0.17527).epsilon(1e-4));
  CHECK(calib::adaptive_margin(a, 0.0) == 0.0);
  const double once = calib::adaptive_margin(a, 1.3);
  CHECK(calib::adaptive_margin(a, 2.6) == doctest::Approx(2.0 * once));
  CHECK_THROWS_AS(calib::adaptive_margin(a, -0.1), ContractViolation);
}

TEST_CASE("conformal_quantile: hand-counted rank") {
  std::vector<double> scores;
  for (int i = 1; i <= 10; ++i) scores.push_back(double(i));
  CHECK(calib::conformal_quantile(scores, 0.2) == 9.0);  // ceil(11*0.8) = 9th
}

TEST_CASE("conformal_quantile: worst-case limit returns the max") {
  const std::vector<double> scores = {3.0, 7.0, 1.0, 5.0};
  // ceil((N+1)(1-alpha)) = N for alpha slightly above 1/(N+1).
  CHECK(calib::conformal_quantile(scores, 0.21) == 7.0);
}

TEST_CASE("conformal_quantile: constant scores and infeasible alpha") {
  const std::vector<double> scores(6, 2.5);
  CHECK(calib::conformal_quantile(scores, 0.3) == 2.5);
  CHECK_THROWS_AS(calib::conformal_quantile(scores, 0.01), ContractViolation);
}

TEST_CASE("prediction_interval: degenerate and hand-sized") {
  CalibrationArtifact a = artifact_with_phi(0.1, 0.05);
  const Eigen::Vector2d est(3.0, 0.5);

  const auto degenerate = calib::prediction_interval(a, est, 0.0);
  CHECK(degenerate[0].lo == 3.0);
  CHECK(degenerate[0].hi == 3.0);

  const auto iv = calib::prediction_interval(a, est, 2.0);
  CHECK(iv[0].lo == doctest::Approx(2.8));
  CHECK(iv[0].hi == doctest::Approx(3.2));
  CHECK(iv[1].lo == doctest::Approx(0.4));
  CHECK(iv[1].hi == doctest::Approx(0.6));
}

TEST_CASE("interval membership round-trips the ratio definition") {
  Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    const double unc = rng.uniform(0.1, 3.0);
    const double phi = rng.uniform(0.0, 0.2);
    const double err = rng.uniform(0.0, 0.5);
    CHECK(calib::in_interval(err, phi, unc) == (err / unc <= phi));
  }
}

TEST_CASE("phi monotone in gamma: subset max can only grow") {
  Rng rng(3);
  std::vector<double> scores;
  Eigen::MatrixXd errors(400, 2);
  for (int i = 0; i < 400; ++i) {
    scores.push_back(rng.uniform(0.2, 3.0));
    errors(i, 0) = rng.uniform(0.0, 0.4);
    errors(i, 1) = rng.uniform(0.0, 0.2);
  }
  const double sigma = calib::population_std(scores);
  Eigen::Vector2d prev(0.0, 0.0);
  for (double mult : {1.0, 2.0, 4.0, 5.0}) {
    const auto kept = calib::filter_calibration(scores, mult * sigma);
    Eigen::MatrixXd kept_err(Eigen::Index(kept.size()), 2);
    std::vector<double> kept_scores;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      kept_err.row(Eigen::Index(i)) = errors.row(kept[i]);
      kept_scores.push_back(scores[std::size_t(kept[i])]);
    }
    const Eigen::VectorXd phi = calib::base_error_ratio(kept_err, kept_scores);
    CHECK(phi(0) >= prev(0));
    CHECK(phi(1) >= prev(1));
    prev = phi;
  }
}

TEST_CASE("every filtered point is covered by construction") {
  Rng rng(41);
  std::vector<double> scores;
  Eigen::MatrixXd errors(250, 2);
  for (int i = 0; i < 250; ++i) {
    scores.push_back(rng.uniform(0.3, 2.0));
    errors(i, 0) = rng.uniform(0.0, 0.6);
    errors(i, 1) = rng.uniform(0.0, 0.3);
  }
  const double sigma = calib::population_std(scores);
  const auto kept = calib::filter_calibration(scores, sigma);
  Eigen::MatrixXd kept_err(Eigen::Index(kept.size()), 2);
  std::vector<double> kept_scores;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    kept_err.row(Eigen::Index(i)) = errors.row(kept[i]);
    kept_scores.push_back(scores[std::size_t(kept[i])]);
  }
  const Eigen::VectorXd phi = calib::base_error_ratio(kept_err, kept_scores);
  for (Eigen::Index i = 0; i < kept_err.rows(); ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(calib::in_interval(kept_err(i, j), phi(j), kept_scores[std::size_t(i)]));
}

TEST_CASE("artifact JSON round-trips") {
  CalibrationArtifact a = artifact_with_phi(0.0369, 0.01777);
  const std::string path =
      (std::filesystem::temp_directory_path() / "atom_cal_test.json").string();
  calib::save_artifact(a, path, "unit-test");
  const CalibrationArtifact back = calib::load_artifact(path);
  CHECK(back.mu_unc == a.mu_unc);
  CHECK(back.sigma_unc == a.sigma_unc);
  CHECK(back.gamma == a.gamma);
  CHECK(back.phi_cal == a.phi_cal);
  CHECK(back.n_cal == a.n_cal);
  CHECK(back.n_filtered == a.n_filtered);
  CHECK(back.euq_id == a.euq_id);
  std::filesystem::remove(path);
}
