#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "atom/common.hpp"

namespace atom::nn {

/// Fully connected network with tanh hidden layers and an identity output
/// layer. Immutable once trained; forward/param_jacobian are pure.
///
/// Parameter vector layout (used by param_jacobian columns and the model
/// file): layers in order, and within layer l first the weight matrix
/// W_l (out x in, row-major), then the bias b_l.
struct DenseNet {
  std::vector<int> layer_sizes;          // input dim, hidden..., output dim
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: (sizes[l+1] x sizes[l])
  std::vector<Eigen::VectorXd> biases;   // biases[l]: (sizes[l+1])

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  int layer_count() const { return int(weights.size()); }
  std::size_t param_count() const;
};

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  double learning_rate = 0.001;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
  // Plain fixed-rate gradient descent, or Adam (beta1 0.9, beta2 0.999,
  // eps 1e-8). Loss is mean squared error: (1/N) sum ||net(x) - y||^2.
  Optimizer optimizer = Optimizer::kAdam;
};

/// Builds a net with fan-in-scaled uniform weights, U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
/// Deterministic for a given seed.
DenseNet make_net(const std::vector<int>& layer_sizes, std::uint64_t seed);

/// Checks the structural invariants (chained shapes, finite parameters).
void validate(const DenseNet& net);

Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& input);

/// Batched forward pass; rows of `inputs` are samples.
Eigen::MatrixXd forward_batch(const DenseNet& net, const Eigen::MatrixXd& inputs);

double mse(const DenseNet& net, const Eigen::MatrixXd& inputs,
           const Eigen::MatrixXd& targets);

/// Minibatch gradient descent on MSE with a fixed learning rate.
/// Throws DivergenceError naming the epoch if the loss goes non-finite.
DenseNet train(const DenseNet& net, const Eigen::MatrixXd& inputs,
               const Eigen::MatrixXd& targets, const TrainConfig& cfg);

/// Jacobian of the network output with respect to all parameters,
/// shape (output_dim x param_count); row j is the gradient of output j.
Eigen::MatrixXd param_jacobian(const DenseNet& net, const Eigen::VectorXd& input);

// Model file: "ATOMNN1\0" magic, u64 layer count, u64 sizes, then the
// parameter vector as little-endian f64 in the layout documented above.
void save_net(const DenseNet& net, const std::string& path);
DenseNet load_net(const std::string& path);

}  // namespace atom::nn
