#include "atom/nn.hpp"

#include <cstdio>
#include <cstring>
#include <memory>
#include <numeric>

#include "atom/binio.hpp"

namespace atom::nn {

std::size_t DenseNet::param_count() const {
  std::size_t p = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    p += std::size_t(weights[l].size()) + std::size_t(biases[l].size());
  return p;
}

DenseNet make_net(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2)
    throw ContractViolation("make_net: need at least input and output layers");
  for (int s : layer_sizes)
    if (s <= 0) throw ContractViolation("make_net: layer sizes must be positive");

  DenseNet net;
  net.layer_sizes = layer_sizes;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int in = layer_sizes[l];
    const int out = layer_sizes[l + 1];
    const double scale = 1.0 / std::sqrt(double(in));
    Eigen::MatrixXd w(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-scale, scale);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return net;
}

void validate(const DenseNet& net) {
  if (net.layer_sizes.size() < 2)
    throw ContractViolation("DenseNet: fewer than 2 layers");
  if (net.weights.size() + 1 != net.layer_sizes.size() ||
      net.biases.size() != net.weights.size())
    throw ContractViolation("DenseNet: layer list and parameter list disagree");
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (net.weights[l].rows() != net.layer_sizes[l + 1] ||
        net.weights[l].cols() != net.layer_sizes[l] ||
        net.biases[l].size() != net.layer_sizes[l + 1])
      throw ContractViolation("DenseNet: inconsistent parameter shapes");
    if (!net.weights[l].allFinite() || !net.biases[l].allFinite())
      throw ContractViolation("DenseNet: non-finite parameters");
  }
}

Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& input) {
  if (input.size() != net.input_dim())
    throw ContractViolation("forward: input dimension mismatch");
  Eigen::VectorXd a = input;
  const int L = net.layer_count();
  for (int l = 0; l < L; ++l) {
    a = net.weights[l] * a + net.biases[l];
    if (l + 1 < L) a = a.array().tanh();
  }
  return a;
}

Eigen::MatrixXd forward_batch(const DenseNet& net, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != net.input_dim())
    throw ContractViolation("forward_batch: input dimension mismatch");
  Eigen::MatrixXd a = inputs;
  const int L = net.layer_count();
  for (int l = 0; l < L; ++l) {
    a = (a * net.weights[l].transpose()).rowwise() + net.biases[l].transpose();
    if (l + 1 < L) a = a.array().tanh();
  }
  return a;
}

double mse(const DenseNet& net, const Eigen::MatrixXd& inputs,
           const Eigen::MatrixXd& targets) {
  const Eigen::MatrixXd pred = forward_batch(net, inputs);
  return (pred - targets).squaredNorm() / double(inputs.rows());
}

namespace {

struct AdamState {
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
  long t = 0;

  explicit AdamState(const DenseNet& net) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      m_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
      v_w.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
      m_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
      v_b.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
  }
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// One optimizer step on a batch. Rows of x/y are samples.
void train_step(DenseNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                const TrainConfig& cfg, AdamState* adam) {
  const int L = net.layer_count();
  std::vector<Eigen::MatrixXd> act(L + 1);  // act[l]: activations entering layer l
  act[0] = x;
  for (int l = 0; l < L; ++l) {
    act[l + 1] =
        (act[l] * net.weights[l].transpose()).rowwise() + net.biases[l].transpose();
    if (l + 1 < L) act[l + 1] = act[l + 1].array().tanh();
  }
  const double inv_n = 1.0 / double(x.rows());
  // d(MSE)/d(output), MSE = (1/N) sum ||pred - y||^2
  Eigen::MatrixXd delta = 2.0 * inv_n * (act[L] - y);
  if (adam) ++adam->t;
  for (int l = L - 1; l >= 0; --l) {
    const Eigen::MatrixXd grad_w = delta.transpose() * act[l];
    const Eigen::VectorXd grad_b = delta.colwise().sum();
    if (l > 0) {
      delta = (delta * net.weights[l]).array() *
              (1.0 - act[l].array().square());  // tanh' = 1 - tanh^2
    }
    if (!adam) {
      net.weights[l] -= cfg.learning_rate * grad_w;
      net.biases[l] -= cfg.learning_rate * grad_b;
      continue;
    }
    const double bc1 = 1.0 - std::pow(kAdamBeta1, double(adam->t));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, double(adam->t));
    auto& mw = adam->m_w[std::size_t(l)];
    auto& vw = adam->v_w[std::size_t(l)];
    mw = kAdamBeta1 * mw + (1.0 - kAdamBeta1) * grad_w;
    vw = kAdamBeta2 * vw.array() + (1.0 - kAdamBeta2) * grad_w.array().square();
    net.weights[l].array() -= cfg.learning_rate * (mw.array() / bc1) /
                              ((vw.array() / bc2).sqrt() + kAdamEps);
    auto& mb = adam->m_b[std::size_t(l)];
    auto& vb = adam->v_b[std::size_t(l)];
    mb = kAdamBeta1 * mb + (1.0 - kAdamBeta1) * grad_b;
    vb = kAdamBeta2 * vb.array() + (1.0 - kAdamBeta2) * grad_b.array().square();
    net.biases[l].array() -= cfg.learning_rate * (mb.array() / bc1) /
                             ((vb.array() / bc2).sqrt() + kAdamEps);
  }
}

}  // namespace

DenseNet train(const DenseNet& net, const Eigen::MatrixXd& inputs,
               const Eigen::MatrixXd& targets, const TrainConfig& cfg) {
  validate(net);
  const Eigen::Index n = inputs.rows();
  if (n == 0) throw ContractViolation("train: empty dataset");
  if (inputs.cols() != net.input_dim() || targets.cols() != net.output_dim() ||
      targets.rows() != n)
    throw ContractViolation("train: dataset dimensions do not match the net");
  if (cfg.learning_rate <= 0.0)
    throw ContractViolation("train: learning_rate must be positive");
  if (cfg.batch_size <= 0 || Eigen::Index(cfg.batch_size) > n)
    throw ContractViolation("train: batch_size must be in [1, dataset size]");
  if (cfg.epochs < 0) throw ContractViolation("train: negative epoch count");

  DenseNet out = net;
  Rng rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::unique_ptr<AdamState> adam;
  if (cfg.optimizer == Optimizer::kAdam) adam = std::make_unique<AdamState>(out);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the project RNG keeps runs bit-reproducible.
    for (Eigen::Index i = n - 1; i > 0; --i) {
      const auto j = Eigen::Index(rng.uniform_index(std::uint64_t(i) + 1));
      std::swap(order[std::size_t(i)], order[std::size_t(j)]);
    }
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Eigen::MatrixXd bx(b, inputs.cols()), by(b, targets.cols());
      for (Eigen::Index i = 0; i < b; ++i) {
        bx.row(i) = inputs.row(order[std::size_t(start + i)]);
        by.row(i) = targets.row(order[std::size_t(start + i)]);
      }
      train_step(out, bx, by, cfg, adam.get());
    }
    const double loss = mse(out, inputs, targets);
    if (!std::isfinite(loss))
      throw DivergenceError(
          "train: non-finite loss at epoch " + std::to_string(epoch), epoch);
  }
  return out;
}

Eigen::MatrixXd param_jacobian(const DenseNet& net, const Eigen::VectorXd& input) {
  if (input.size() != net.input_dim())
    throw ContractViolation("param_jacobian: input dimension mismatch");
  const int L = net.layer_count();
  const int n_out = net.output_dim();
  const std::size_t P = net.param_count();

  std::vector<Eigen::VectorXd> act(std::size_t(L) + 1);
  act[0] = input;
  for (int l = 0; l < L; ++l) {
    act[std::size_t(l) + 1] = net.weights[l] * act[std::size_t(l)] + net.biases[l];
    if (l + 1 < L) act[std::size_t(l) + 1] = act[std::size_t(l) + 1].array().tanh();
  }

  std::vector<std::size_t> offset(static_cast<std::size_t>(L));  // start column of layer l
  std::size_t pos = 0;
  for (int l = 0; l < L; ++l) {
    offset[std::size_t(l)] = pos;
    pos += std::size_t(net.weights[l].size()) + std::size_t(net.biases[l].size());
  }

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n_out, Eigen::Index(P));
  for (int j = 0; j < n_out; ++j) {
    Eigen::VectorXd delta = Eigen::VectorXd::Unit(n_out, j);
    for (int l = L - 1; l >= 0; --l) {
      const Eigen::VectorXd& a_in = act[std::size_t(l)];
      const int out = net.layer_sizes[std::size_t(l) + 1];
      const int in = net.layer_sizes[std::size_t(l)];
      std::size_t col = offset[std::size_t(l)];
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c)
          jac(j, Eigen::Index(col++)) = delta(r) * a_in(c);
      for (int r = 0; r < out; ++r) jac(j, Eigen::Index(col++)) = delta(r);
      if (l > 0) {
        delta = net.weights[l].transpose() * delta;
        delta.array() *= 1.0 - act[std::size_t(l)].array().square();
      }
    }
  }
  return jac;
}

void save_net(const DenseNet& net, const std::string& path) {
  validate(net);
  io::Writer w(path);
  w.magic("ATOMNN1");
  w.u64(net.layer_sizes.size());
  for (int s : net.layer_sizes) w.u64(std::uint64_t(s));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c)
        w.f64(net.weights[l](r, c));
    for (Eigen::Index r = 0; r < net.biases[l].size(); ++r)
      w.f64(net.biases[l](r));
  }
}

DenseNet load_net(const std::string& path) {
  io::Reader r(path);
  r.expect_magic("ATOMNN1");
  const std::uint64_t n_layers = r.u64();
  if (n_layers < 2 || n_layers > 64)
    throw ContractViolation("load_net: corrupt layer count in " + path);
  std::vector<int> sizes(n_layers);
  for (auto& s : sizes) s = int(r.u64());
  DenseNet net;
  net.layer_sizes = sizes;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (Eigen::Index rr = 0; rr < w.rows(); ++rr)
      for (Eigen::Index cc = 0; cc < w.cols(); ++cc) w(rr, cc) = r.f64();
    Eigen::VectorXd b(sizes[l + 1]);
    for (Eigen::Index rr = 0; rr < b.size(); ++rr) b(rr) = r.f64();
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  validate(net);
  return net;
}

}  // namespace atom::nn
