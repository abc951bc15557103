#include "semdrive/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "semdrive/rng.hpp"

namespace semdrive {

std::vector<int> NetworkParams::layer_sizes() const {
  std::vector<int> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(input_dim());
  for (const auto& l : layers) sizes.push_back(static_cast<int>(l.weights.rows()));
  return sizes;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

bool NetworkParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

NetworkParams NetworkParams::zeros_like() const {
  NetworkParams z;
  z.layers.reserve(layers.size());
  for (const auto& l : layers) {
    z.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  }
  return z;
}

NetworkParams init_network(std::span<const int> sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw std::invalid_argument("network needs at least input and output sizes");
  for (int s : sizes) {
    if (s <= 0) throw std::invalid_argument("layer sizes must be positive, got " + std::to_string(s));
  }
  Rng rng = Rng::stream(seed, RngStream::kInit);
  NetworkParams p;
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    const int fan_in = sizes[i - 1];
    const bool is_output = i + 1 == sizes.size();
    const double bound = std::sqrt((is_output ? 3.0 : 6.0) / fan_in);
    DenseLayer layer{Eigen::MatrixXd(sizes[i], fan_in), Eigen::VectorXd::Zero(sizes[i])};
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = rng.uniform(-bound, bound);
      }
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

NetworkParams init_q_network(int input_dim, std::uint64_t seed, std::span<const int> hidden,
                             int outputs) {
  if (input_dim <= 0) {
    throw std::invalid_argument("input_dim must be positive, got " + std::to_string(input_dim));
  }
  std::vector<int> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(outputs);
  return init_network(sizes, seed);
}

namespace {

void check_input(const NetworkParams& params, std::size_t n) {
  if (params.layers.empty()) throw std::invalid_argument("empty network");
  if (static_cast<int>(n) != params.input_dim()) {
    throw std::invalid_argument("input has " + std::to_string(n) + " entries, network expects " +
                                std::to_string(params.input_dim()));
  }
}

// Pre-activations of every layer for a batch, kept for backprop.
struct Activations {
  std::vector<Eigen::MatrixXd> pre;   // z_l
  std::vector<Eigen::MatrixXd> post;  // a_l, post[0] = input
};

Activations run_forward(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  Activations acts;
  acts.post.push_back(inputs);
  const std::size_t n = params.layers.size();
  for (std::size_t l = 0; l < n; ++l) {
    const auto& layer = params.layers[l];
    Eigen::MatrixXd z = layer.weights * acts.post.back();
    z.colwise() += layer.bias;
    Eigen::MatrixXd a = (l + 1 == n) ? z : Eigen::MatrixXd(z.cwiseMax(0.0));
    acts.pre.push_back(std::move(z));
    acts.post.push_back(std::move(a));
  }
  return acts;
}

}  // namespace

Eigen::VectorXd forward(const NetworkParams& params, std::span<const double> x) {
  check_input(params, x.size());
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  if (!a.allFinite()) throw std::invalid_argument("non-finite network input");
  const std::size_t n = params.layers.size();
  for (std::size_t l = 0; l < n; ++l) {
    Eigen::VectorXd z = params.layers[l].weights * a + params.layers[l].bias;
    a = (l + 1 == n) ? z : Eigen::VectorXd(z.cwiseMax(0.0));
  }
  return a;
}

Eigen::VectorXd forward(const NetworkParams& params, std::span<const float> x) {
  std::vector<double> xd(x.begin(), x.end());
  return forward(params, std::span<const double>(xd));
}

Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  check_input(params, static_cast<std::size_t>(inputs.rows()));
  if (!inputs.allFinite()) throw std::invalid_argument("non-finite network input");
  Eigen::MatrixXd a = inputs;
  const std::size_t n = params.layers.size();
  for (std::size_t l = 0; l < n; ++l) {
    Eigen::MatrixXd z = params.layers[l].weights * a;
    z.colwise() += params.layers[l].bias;
    a = (l + 1 == n) ? z : Eigen::MatrixXd(z.cwiseMax(0.0));
  }
  return a;
}

double huber_loss(double error, double delta) {
  const double e = std::abs(error);
  return e <= delta ? 0.5 * e * e : delta * (e - 0.5 * delta);
}

double huber_derivative(double error, double delta) {
  if (error > delta) return delta;
  if (error < -delta) return -delta;
  return error;
}

Gradients batch_gradients(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                          std::span<const int> actions, std::span<const double> targets,
                          double huber_delta, double* loss) {
  const Eigen::Index batch = inputs.cols();
  if (static_cast<Eigen::Index>(actions.size()) != batch ||
      static_cast<Eigen::Index>(targets.size()) != batch) {
    throw std::invalid_argument("batch_gradients: actions/targets size mismatch");
  }
  check_input(params, static_cast<std::size_t>(inputs.rows()));
  const Activations acts = run_forward(params, inputs);
  const Eigen::MatrixXd& q = acts.post.back();

  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), batch);
  double total = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    if (a < 0 || a >= q.rows()) throw std::out_of_range("batch_gradients: action index");
    const double err = q(a, i) - targets[static_cast<std::size_t>(i)];
    total += huber_loss(err, huber_delta);
    delta(a, i) = huber_derivative(err, huber_delta) / static_cast<double>(batch);
  }
  if (loss != nullptr) *loss = total / static_cast<double>(batch);

  Gradients g = params.zeros_like();
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    g.layers[l].weights.noalias() = delta * acts.post[l].transpose();
    g.layers[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = params.layers[l].weights.transpose() * delta;
    delta = back.cwiseProduct((acts.pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

Gradients backward(const NetworkParams& params, std::span<const double> x, int action,
                   double td_target, double huber_delta) {
  check_input(params, x.size());
  const Eigen::MatrixXd input =
      Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const int actions[1] = {action};
  const double targets[1] = {td_target};
  return batch_gradients(params, input, actions, targets, huber_delta);
}

void rmsprop_step(NetworkParams& params, OptimizerState& state, const Gradients& grads,
                  const RmsPropConfig& cfg) {
  if (params.layers.size() != grads.layers.size() ||
      params.layers.size() != state.mean_square.layers.size()) {
    throw std::invalid_argument("rmsprop_step: layer count mismatch");
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto update = [&](auto& p, auto& acc, const auto& g) {
      if (p.size() != g.size() || acc.size() != g.size()) {
        throw std::invalid_argument("rmsprop_step: shape mismatch");
      }
      acc.array() = cfg.decay * acc.array() + (1.0 - cfg.decay) * g.array().square();
      p.array() -= cfg.learning_rate * g.array() / (acc.array() + cfg.epsilon).sqrt();
    };
    update(params.layers[l].weights, state.mean_square.layers[l].weights, grads.layers[l].weights);
    update(params.layers[l].bias, state.mean_square.layers[l].bias, grads.layers[l].bias);
  }
}

}  // namespace semdrive
