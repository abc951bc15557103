#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace semdrive {

/// One affine layer; `weights` is (outputs x inputs).
struct DenseLayer {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

/// Fully connected network. Hidden layers use ReLU, the output is linear.
struct NetworkParams {
  std::vector<DenseLayer> layers;

  int input_dim() const { return static_cast<int>(layers.front().weights.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().weights.rows()); }
  /// Input width followed by every layer's output width.
  std::vector<int> layer_sizes() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
  /// Same shapes, every entry zero.
  NetworkParams zeros_like() const;
};

using Gradients = NetworkParams;

/// Hidden widths of the Q-network; the output layer has one unit per action.
inline const std::vector<int> kQNetworkHidden = {512, 512, 256, 64};

/// Uniform fan-in initialization (He bound for ReLU-fed layers, LeCun bound
/// for the linear output), zero biases. `sizes` = {input, hidden..., output}.
NetworkParams init_network(std::span<const int> sizes, std::uint64_t seed);
NetworkParams init_q_network(int input_dim, std::uint64_t seed,
                             std::span<const int> hidden = kQNetworkHidden, int outputs = 5);

/// Throws std::invalid_argument on a size mismatch or non-finite input.
Eigen::VectorXd forward(const NetworkParams& params, std::span<const double> x);
Eigen::VectorXd forward(const NetworkParams& params, std::span<const float> x);

/// Column-batched forward pass; `inputs` is (input_dim x batch).
Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs);

double huber_loss(double error, double delta);
double huber_derivative(double error, double delta);

/// Gradient of the batch-mean Huber loss between q[action_i] and target_i.
/// Returns the mean loss through `loss` when non-null.
Gradients batch_gradients(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                          std::span<const int> actions, std::span<const double> targets,
                          double huber_delta, double* loss = nullptr);

/// Single-sample gradient.
Gradients backward(const NetworkParams& params, std::span<const double> x, int action,
                   double td_target, double huber_delta = 1.0);

struct RmsPropConfig {
  double learning_rate = 1e-5;
  double decay = 0.95;
  double epsilon = 1e-8;
};

/// Running mean of squared gradients, one entry per parameter.
struct OptimizerState {
  NetworkParams mean_square;

  static OptimizerState for_params(const NetworkParams& params) {
    return {params.zeros_like()};
  }
};

/// acc <- decay*acc + (1-decay)*g^2;  p <- p - lr*g/sqrt(acc + eps)
void rmsprop_step(NetworkParams& params, OptimizerState& state, const Gradients& grads,
                  const RmsPropConfig& cfg);

}  // namespace semdrive
