#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "atom/nn.hpp"

namespace atom::euq {

// Epistemic uncertainty scoring. Both modules map a network input (a
// normalized scan, see perception::normalize_scan) to a nonnegative scalar
// that is low on inputs resembling the training data and high on novel ones.

/// M networks with identical architecture trained from distinct seeds.
struct Ensemble {
  std::vector<nn::DenseNet> members;
};

void validate(const Ensemble& ens);

/// Prediction-variance score:
///   Unc(y) = (1/M) sum_m q_m(y)^T q_m(y) - mu(y)^T mu(y),
/// the trace of the (population) covariance of the member predictions.
/// Clamped at 0 against rounding.
double unc_ensemble(const Ensemble& ens, const Eigen::VectorXd& input);

/// Top-k eigenpairs of the training-data Gauss-Newton/Fisher matrix
/// G = sum_i J_i^T J_i plus the Gaussian prior scale. Eigenvalues are
/// sorted descending; eigenvector columns are orthonormal.
struct LaplaceSketch {
  Eigen::VectorXd eigenvalues;   // length k, descending, >= 0
  Eigen::MatrixXd eigenvectors;  // P x k, orthonormal columns
  double prior_scale = 1.0;

  int rank() const { return int(eigenvalues.size()); }
  Eigen::Index param_count() const { return eigenvectors.rows(); }
};

void validate(const LaplaceSketch& sketch);

/// Offline phase: accumulates G over the rows of `inputs` (network inputs,
/// one sample per row) and extracts the exact top-k eigenpairs. For small
/// parameter counts this eigendecomposes G directly; for larger nets it
/// uses the Gram matrix of the stacked per-sample Jacobians, which yields
/// the same nonzero eigenpairs without forming the P x P matrix.
LaplaceSketch fit_laplace(const nn::DenseNet& net, const Eigen::MatrixXd& inputs,
                          int k, double prior_scale);

/// Online phase: predictive standard-deviation score
///   Unc(y) = sqrt( trace( J Sigma J^T ) ),
/// with the low-rank Laplace posterior
///   Sigma = s^2 ( I - U diag(l_i s^2 / (1 + l_i s^2)) U^T ),  s = prior_scale.
/// Directions of J outside the training span receive the full prior
/// variance, so novel inputs score higher.
double unc_laplace(const LaplaceSketch& sketch, const nn::DenseNet& net,
                   const Eigen::VectorXd& input);

// Sketch file: "ATOMSK1" magic, u64 P, u64 k, f64 prior_scale, k
// eigenvalues, then the P x k eigenvector matrix column by column.
void save_sketch(const LaplaceSketch& sketch, const std::string& path);
LaplaceSketch load_sketch(const std::string& path);

// Ensemble on disk: member model files member_<i>.nn plus manifest.json
// in `dir`.
void save_ensemble(const Ensemble& ens, const std::string& dir);
Ensemble load_ensemble(const std::string& dir);

}  // namespace atom::euq
