#include "atom/euq.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "atom/binio.hpp"

namespace atom::euq {

void validate(const Ensemble& ens) {
  if (ens.members.size() < 2)
    throw ContractViolation("Ensemble: need at least 2 members");
  for (const auto& m : ens.members) {
    nn::validate(m);
    if (m.layer_sizes != ens.members.front().layer_sizes)
      throw ContractViolation("Ensemble: members differ in architecture");
  }
}

double unc_ensemble(const Ensemble& ens, const Eigen::VectorXd& input) {
  validate(ens);
  const double m_count = double(ens.members.size());
  double sq_sum = 0.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(ens.members.front().output_dim());
  for (const auto& member : ens.members) {
    const Eigen::VectorXd pred = nn::forward(member, input);
    sq_sum += pred.squaredNorm();
    mean += pred;
  }
  mean /= m_count;
  return std::max(0.0, sq_sum / m_count - mean.squaredNorm());
}

void validate(const LaplaceSketch& sketch) {
  const int k = sketch.rank();
  if (k <= 0) throw ContractViolation("LaplaceSketch: empty");
  if (sketch.eigenvectors.cols() != k)
    throw ContractViolation("LaplaceSketch: eigenvector count mismatch");
  if (sketch.prior_scale <= 0.0)
    throw ContractViolation("LaplaceSketch: prior_scale must be > 0");
  for (int i = 0; i < k; ++i) {
    if (sketch.eigenvalues(i) < 0.0)
      throw ContractViolation("LaplaceSketch: negative eigenvalue");
    if (i > 0 && sketch.eigenvalues(i) > sketch.eigenvalues(i - 1) + 1e-12)
      throw ContractViolation("LaplaceSketch: eigenvalues not descending");
  }
  const Eigen::MatrixXd gram =
      sketch.eigenvectors.transpose() * sketch.eigenvectors;
  if ((gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-8)
    throw ContractViolation("LaplaceSketch: eigenvectors not orthonormal");
}

LaplaceSketch fit_laplace(const nn::DenseNet& net, const Eigen::MatrixXd& inputs,
                          int k, double prior_scale) {
  nn::validate(net);
  const Eigen::Index n_samples = inputs.rows();
  if (n_samples == 0) throw ContractViolation("fit_laplace: empty data");
  if (inputs.cols() != net.input_dim())
    throw ContractViolation("fit_laplace: input dimension mismatch");
  const auto p_count = Eigen::Index(net.param_count());
  if (k <= 0 || Eigen::Index(k) > p_count)
    throw ContractViolation("fit_laplace: rank k must be in [1, P]");
  if (prior_scale <= 0.0)
    throw ContractViolation("fit_laplace: prior_scale must be > 0");

  const int n_out = net.output_dim();
  LaplaceSketch sketch;
  sketch.prior_scale = prior_scale;

  // Up to ~2k parameters the P x P matrix is cheap to form and
  // eigendecompose directly; this path also covers rank-deficient G for
  // any k <= P. Beyond that, work with the (N*n_out)^2 Gram matrix of the
  // stacked Jacobians: A A^T shares the nonzero spectrum of G = A^T A and
  // the eigenvectors map back through A^T.
  const bool dense_path = p_count <= 2048;
  if (dense_path) {
    Eigen::MatrixXd fisher = Eigen::MatrixXd::Zero(p_count, p_count);
    for (Eigen::Index i = 0; i < n_samples; ++i) {
      const Eigen::MatrixXd jac = nn::param_jacobian(net, inputs.row(i));
      if (!jac.allFinite())
        throw ContractViolation("fit_laplace: non-finite Jacobian at sample " +
                                std::to_string(i));
      fisher.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose(), 1.0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        fisher.selfadjointView<Eigen::Lower>());
    if (eig.info() != Eigen::Success)
      throw std::runtime_error("fit_laplace: eigendecomposition failed");
    sketch.eigenvalues.resize(k);
    sketch.eigenvectors.resize(p_count, k);
    for (int i = 0; i < k; ++i) {  // solver returns ascending order
      sketch.eigenvalues(i) = std::max(0.0, eig.eigenvalues()(p_count - 1 - i));
      sketch.eigenvectors.col(i) = eig.eigenvectors().col(p_count - 1 - i);
    }
  } else {
    const Eigen::Index rows = n_samples * n_out;
    if (Eigen::Index(k) > rows)
      throw ContractViolation(
          "fit_laplace: rank k exceeds the accumulated Jacobian rank bound");
    Eigen::MatrixXd stacked(rows, p_count);
    for (Eigen::Index i = 0; i < n_samples; ++i) {
      const Eigen::MatrixXd jac = nn::param_jacobian(net, inputs.row(i));
      if (!jac.allFinite())
        throw ContractViolation("fit_laplace: non-finite Jacobian at sample " +
                                std::to_string(i));
      stacked.middleRows(i * n_out, n_out) = jac;
    }
    Eigen::MatrixXd gram(rows, rows);
    gram.setZero();
    gram.selfadjointView<Eigen::Lower>().rankUpdate(stacked, 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        gram.selfadjointView<Eigen::Lower>());
    if (eig.info() != Eigen::Success)
      throw std::runtime_error("fit_laplace: eigendecomposition failed");
    const double floor = 1e-10 * std::max(1.0, eig.eigenvalues()(rows - 1));
    sketch.eigenvalues.resize(k);
    sketch.eigenvectors.resize(p_count, k);
    for (int i = 0; i < k; ++i) {
      const double lambda = eig.eigenvalues()(rows - 1 - i);
      if (lambda < floor)
        throw ContractViolation(
            "fit_laplace: requested rank exceeds the numerical rank of the "
            "Fisher matrix; reduce k");
      sketch.eigenvalues(i) = lambda;
      sketch.eigenvectors.col(i) =
          stacked.transpose() * eig.eigenvectors().col(rows - 1 - i) /
          std::sqrt(lambda);
    }
  }
  validate(sketch);
  return sketch;
}

double unc_laplace(const LaplaceSketch& sketch, const nn::DenseNet& net,
                   const Eigen::VectorXd& input) {
  if (sketch.param_count() != Eigen::Index(net.param_count()))
    throw ContractViolation("unc_laplace: sketch does not match the net");
  const Eigen::MatrixXd jac = nn::param_jacobian(net, input);
  const double s2 = sketch.prior_scale * sketch.prior_scale;
  // trace(J Sigma J^T) = s^2 ( ||J||_F^2 - sum_i w_i ||J u_i||^2 ),
  // w_i = l_i s^2 / (1 + l_i s^2).
  const Eigen::MatrixXd ju = jac * sketch.eigenvectors;  // n_out x k
  double reduced = 0.0;
  for (int i = 0; i < sketch.rank(); ++i) {
    const double w = sketch.eigenvalues(i) * s2 / (1.0 + sketch.eigenvalues(i) * s2);
    reduced += w * ju.col(i).squaredNorm();
  }
  return std::sqrt(std::max(0.0, s2 * (jac.squaredNorm() - reduced)));
}

void save_sketch(const LaplaceSketch& sketch, const std::string& path) {
  validate(sketch);
  io::Writer w(path);
  w.magic("ATOMSK1");
  w.u64(std::uint64_t(sketch.param_count()));
  w.u64(std::uint64_t(sketch.rank()));
  w.f64(sketch.prior_scale);
  for (int i = 0; i < sketch.rank(); ++i) w.f64(sketch.eigenvalues(i));
  for (int c = 0; c < sketch.rank(); ++c)
    for (Eigen::Index r = 0; r < sketch.param_count(); ++r)
      w.f64(sketch.eigenvectors(r, c));
}

LaplaceSketch load_sketch(const std::string& path) {
  io::Reader r(path);
  r.expect_magic("ATOMSK1");
  const auto p_count = Eigen::Index(r.u64());
  const auto k = Eigen::Index(r.u64());
  LaplaceSketch sketch;
  sketch.prior_scale = r.f64();
  sketch.eigenvalues.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) sketch.eigenvalues(i) = r.f64();
  sketch.eigenvectors.resize(p_count, k);
  for (Eigen::Index c = 0; c < k; ++c)
    for (Eigen::Index rr = 0; rr < p_count; ++rr)
      sketch.eigenvectors(rr, c) = r.f64();
  validate(sketch);
  return sketch;
}

void save_ensemble(const Ensemble& ens, const std::string& dir) {
  validate(ens);
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["members"] = nlohmann::json::array();
  for (std::size_t i = 0; i < ens.members.size(); ++i) {
    const std::string name = "member_" + std::to_string(i) + ".nn";
    nn::save_net(ens.members[i], dir + "/" + name);
    manifest["members"].push_back(name);
  }
  std::ofstream out(dir + "/manifest.json", std::ios::trunc);
  out << manifest.dump(2) << "\n";
}

Ensemble load_ensemble(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw std::runtime_error("missing ensemble manifest in " + dir);
  const nlohmann::json manifest = nlohmann::json::parse(in);
  Ensemble ens;
  for (const auto& name : manifest.at("members"))
    ens.members.push_back(nn::load_net(dir + "/" + name.get<std::string>()));
  validate(ens);
  return ens;
}

}  // namespace atom::euq
