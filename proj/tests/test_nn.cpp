#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "atom/nn.hpp"
#include "oracles.hpp"

#include <cstdio>
#include <filesystem>

using namespace atom;

namespace {

nn::DenseNet identity_net() {
  nn::DenseNet net;
  net.layer_sizes = {2, 2};
  net.weights = {Eigen::MatrixXd::Identity(2, 2)};
  net.biases = {Eigen::VectorXd::Zero(2)};
  return net;
}

}  // namespace

TEST_CASE("forward: identity single layer") {
  const nn::DenseNet net = identity_net();
  Eigen::VectorXd in(2);
  in << 1.0, 2.0;
  const Eigen::VectorXd out = nn::forward(net, in);
  CHECK(out(0) == doctest::Approx(1.0));
  CHECK(out(1) == doctest::Approx(2.0));
}

TEST_CASE("forward: zero weights return the biases") {
  nn::DenseNet net;
  net.layer_sizes = {3, 2};
  net.weights = {Eigen::MatrixXd::Zero(2, 3)};
  Eigen::VectorXd b(2);
  b << 0.5, -0.25;
  net.biases = {b};
  Eigen::VectorXd in(3);
  in << 7.0, -1.0, 3.0;
  const Eigen::VectorXd out = nn::forward(net, in);
  CHECK(out(0) == 0.5);
  CHECK(out(1) == -0.25);
}

TEST_CASE("forward: matches the loop oracle on a seeded 2-layer net") {
  const nn::DenseNet net = nn::make_net({4, 8, 3}, 0);
  const Eigen::VectorXd in = Eigen::VectorXd::Ones(4);
  const Eigen::VectorXd got = nn::forward(net, in);
  const std::vector<double> want = oracle::forward(net, {1.0, 1.0, 1.0, 1.0});
  for (int j = 0; j < 3; ++j)
    CHECK(std::abs(got(j) - want[std::size_t(j)]) < 1e-12);
}

TEST_CASE("forward: L-layer composition equals the oracle to 1e-12") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const nn::DenseNet net = nn::make_net({5, 7, 6, 2}, rng.next_u64());
    Eigen::VectorXd in(5);
    std::vector<double> in_v(5);
    for (int i = 0; i < 5; ++i) {
      in(i) = rng.uniform(-2.0, 2.0);
      in_v[std::size_t(i)] = in(i);
    }
    const Eigen::VectorXd got = nn::forward(net, in);
    const std::vector<double> want = oracle::forward(net, in_v);
    for (int j = 0; j < 2; ++j)
      CHECK(std::abs(got(j) - want[std::size_t(j)]) < 1e-12);
  }
}

TEST_CASE("forward: dimension mismatch throws") {
  const nn::DenseNet net = identity_net();
  CHECK_THROWS_AS(nn::forward(net, Eigen::VectorXd::Zero(3)), ContractViolation);
}

TEST_CASE("train: fits y = 2x with a 1-16-1 net") {
  Eigen::MatrixXd x(100, 1), y(100, 1);
  for (int i = 0; i < 100; ++i) {
    x(i, 0) = -1.0 + 2.0 * double(i) / 99.0;
    y(i, 0) = 2.0 * x(i, 0);
  }
  const nn::DenseNet net = nn::make_net({1, 16, 1}, 7);
  nn::TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 2000;
  cfg.batch_size = 25;
  cfg.seed = 3;
  cfg.optimizer = nn::Optimizer::kSgd;
  const nn::DenseNet fit = nn::train(net, x, y, cfg);
  CHECK(nn::mse(fit, x, y) < 1e-3);
}

TEST_CASE("train: Adam mode fits the same target faster") {
  Eigen::MatrixXd x(100, 1), y(100, 1);
  for (int i = 0; i < 100; ++i) {
    x(i, 0) = -1.0 + 2.0 * double(i) / 99.0;
    y(i, 0) = 2.0 * x(i, 0);
  }
  nn::TrainConfig cfg;
  cfg.learning_rate = 0.005;
  cfg.epochs = 400;
  cfg.batch_size = 25;
  cfg.seed = 3;
  const nn::DenseNet fit = nn::train(nn::make_net({1, 16, 1}, 7), x, y, cfg);
  CHECK(nn::mse(fit, x, y) < 1e-3);
}

TEST_CASE("train: zero epochs returns identical weights") {
  const nn::DenseNet net = nn::make_net({3, 4, 2}, 11);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 3);
  Eigen::MatrixXd y = Eigen::MatrixXd::Random(10, 2);
  nn::TrainConfig cfg;
  cfg.epochs = 0;
  cfg.batch_size = 10;
  const nn::DenseNet out = nn::train(net, x, y, cfg);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    CHECK(out.weights[l] == net.weights[l]);
    CHECK(out.biases[l] == net.biases[l]);
  }
}

TEST_CASE("train: same seed twice is bitwise identical") {
  const nn::DenseNet net = nn::make_net({2, 8, 1}, 5);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(32, 2);
  Eigen::MatrixXd y = x.rowwise().sum();
  nn::TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 30;
  cfg.batch_size = 8;
  cfg.seed = 99;
  const nn::DenseNet a = nn::train(net, x, y, cfg);
  const nn::DenseNet b = nn::train(net, x, y, cfg);
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    CHECK(a.weights[l] == b.weights[l]);
    CHECK(a.biases[l] == b.biases[l]);
  }
}

TEST_CASE("train: epoch MSE is non-increasing on a small-rate full-batch run") {
  Eigen::MatrixXd x(40, 1), y(40, 1);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = double(i) / 39.0;
    y(i, 0) = std::sin(3.0 * x(i, 0));
  }
  nn::DenseNet net = nn::make_net({1, 8, 1}, 1);
  nn::TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 1;
  cfg.batch_size = 40;  // full batch
  cfg.seed = 2;
  cfg.optimizer = nn::Optimizer::kSgd;  // the monotone-loss contract is for plain GD
  double prev = nn::mse(net, x, y);
  for (int e = 0; e < 50; ++e) {
    net = nn::train(net, x, y, cfg);
    const double cur = nn::mse(net, x, y);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("train: empty dataset and diverging loss throw") {
  const nn::DenseNet net = nn::make_net({1, 4, 1}, 0);
  CHECK_THROWS_AS(
      nn::train(net, Eigen::MatrixXd(0, 1), Eigen::MatrixXd(0, 1), {}),
      ContractViolation);

  Eigen::MatrixXd x(4, 1), y(4, 1);
  x << 1.0, 2.0, 3.0, 4.0;
  y << 1.0, 2.0, 3.0, 4.0;
  nn::TrainConfig cfg;
  cfg.learning_rate = 1e6;  // guaranteed blow-up
  cfg.epochs = 200;
  cfg.batch_size = 4;
  cfg.optimizer = nn::Optimizer::kSgd;
  CHECK_THROWS_AS(nn::train(net, x, y, cfg), DivergenceError);
}

TEST_CASE("param_jacobian: linear layer analytic entries") {
  // Single linear layer: d out_j / d w_jk = input_k, d out_j / d b_j = 1.
  nn::DenseNet net;
  net.layer_sizes = {3, 2};
  net.weights = {Eigen::MatrixXd::Random(2, 3)};
  net.biases = {Eigen::VectorXd::Random(2)};
  Eigen::VectorXd in(3);
  in << 0.3, -1.2, 2.5;
  const Eigen::MatrixXd jac = nn::param_jacobian(net, in);
  REQUIRE(jac.rows() == 2);
  REQUIRE(jac.cols() == 8);  // 6 weights + 2 biases
  // Row 0: weights of output 0 first (row-major), then output-1 weights are 0.
  for (int c = 0; c < 3; ++c) {
    CHECK(jac(0, c) == doctest::Approx(in(c)));
    CHECK(jac(1, c) == 0.0);
    CHECK(jac(0, 3 + c) == 0.0);
    CHECK(jac(1, 3 + c) == doctest::Approx(in(c)));
  }
  CHECK(jac(0, 6) == 1.0);  // bias block identity pattern
  CHECK(jac(0, 7) == 0.0);
  CHECK(jac(1, 6) == 0.0);
  CHECK(jac(1, 7) == 1.0);
}

TEST_CASE("param_jacobian: zero input zeroes the weight block of that layer") {
  nn::DenseNet net;
  net.layer_sizes = {2, 2};
  net.weights = {Eigen::MatrixXd::Random(2, 2)};
  net.biases = {Eigen::VectorXd::Random(2)};
  const Eigen::MatrixXd jac = nn::param_jacobian(net, Eigen::VectorXd::Zero(2));
  for (int j = 0; j < 2; ++j)
    for (int c = 0; c < 4; ++c) CHECK(jac(j, c) == 0.0);
  CHECK(jac(0, 4) == 1.0);
  CHECK(jac(1, 5) == 1.0);
}

TEST_CASE("param_jacobian: matches central finite differences") {
  Rng rng(17);
  const nn::DenseNet net = nn::make_net({4, 10, 6, 2}, 23);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd in(4);
    for (int i = 0; i < 4; ++i) in(i) = rng.uniform(-1.5, 1.5);
    const Eigen::MatrixXd analytic = nn::param_jacobian(net, in);
    const Eigen::MatrixXd fd = oracle::fd_param_jacobian(net, in, 1e-5);
    const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    CHECK((analytic - fd).cwiseAbs().maxCoeff() / scale < 1e-5);
  }
}

TEST_CASE("model file round-trips bitwise") {
  const nn::DenseNet net = nn::make_net({3, 5, 2}, 31);
  const std::string path =
      (std::filesystem::temp_directory_path() / "atom_nn_test.nn").string();
  nn::save_net(net, path);
  const nn::DenseNet back = nn::load_net(path);
  CHECK(back.layer_sizes == net.layer_sizes);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    CHECK(back.weights[l] == net.weights[l]);
    CHECK(back.biases[l] == net.biases[l]);
  }
  std::filesystem::remove(path);
}
