#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semdrive/binary_io.hpp"
#include "semdrive/mlp.hpp"
#include "semdrive/rng.hpp"

namespace semdrive {

struct Transition {
  std::vector<float> state;
  int action = 0;
  double reward = 0.0;
  std::vector<float> next_state;
  bool terminal = false;
};

/// Fixed-capacity FIFO ring of transitions with contiguous float storage.
class ReplayMemory {
 public:
  ReplayMemory(std::size_t capacity, std::size_t state_dim);

  void store(const Transition& t);
  void store(std::span<const float> state, int action, double reward,
             std::span<const float> next_state, bool terminal);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t state_dim() const { return dim_; }
  std::uint64_t insertions() const { return insertions_; }

  /// i-th oldest stored transition, 0 <= i < size().
  Transition at(std::size_t i) const;

  /// `batch` distinct slot indices drawn uniformly (no replacement).
  std::vector<std::size_t> sample_slots(std::size_t batch, Rng& rng) const;

  std::span<const float> state(std::size_t slot) const;
  std::span<const float> next_state(std::size_t slot) const;
  int action(std::size_t slot) const { return actions_[slot]; }
  double reward(std::size_t slot) const { return rewards_[slot]; }
  bool terminal(std::size_t slot) const { return terminals_[slot] != 0; }

  void save(BinaryWriter& w) const;
  void load(BinaryReader& r);

 private:
  std::size_t slot_of(std::size_t i) const;

  std::size_t capacity_;
  std::size_t dim_;
  std::size_t head_ = 0;  // next slot to write
  std::size_t size_ = 0;
  std::uint64_t insertions_ = 0;
  std::vector<float> states_;
  std::vector<float> next_states_;
  std::vector<int> actions_;
  std::vector<double> rewards_;
  std::vector<std::uint8_t> terminals_;
};

/// Linear decay from `start` to `end` over `anneal_steps`, then constant.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.1;
  std::int64_t anneal_steps = 500'000;

  double at(std::int64_t step) const;
};

/// Uniform random action with probability epsilon, otherwise argmax with
/// ties resolved to the lowest index.
int select_action(std::span<const double> q_values, double epsilon, Rng& rng);
int argmax(std::span<const double> values);

struct AgentConfig {
  std::size_t memory_capacity = 500'000;
  std::size_t warmup = 50'000;
  std::size_t batch_size = 32;
  std::int64_t train_every = 4;
  std::int64_t target_sync_every = 50'000;
  double gamma = 0.9;
  double huber_delta = 1.0;
  RmsPropConfig rmsprop;
  EpsilonSchedule epsilon;
  std::vector<int> hidden = kQNetworkHidden;
};

void validate(const AgentConfig& cfg);

/// y = r for terminal transitions, r + gamma * max_a' Q_target(s', a') otherwise.
std::vector<double> td_targets(const ReplayMemory& memory, std::span<const std::size_t> slots,
                               const NetworkParams& target, double gamma);

struct TickResult {
  bool updated = false;
  bool synced = false;
  double loss = 0.0;
};

/// DQN learner: online and target networks, replay memory, RMSProp state.
class DqnAgent {
 public:
  /// Q-network with cfg.hidden widths and `num_actions` outputs.
  DqnAgent(const AgentConfig& cfg, int input_dim, int num_actions, std::uint64_t seed);
  /// Arbitrary initial network (e.g. a single linear layer).
  DqnAgent(const AgentConfig& cfg, NetworkParams initial, std::uint64_t seed);

  Eigen::VectorXd q_values(std::span<const float> state) const;
  int greedy_action(std::span<const float> state) const;
  /// Epsilon-greedy action at the given environment step.
  int act(std::span<const float> state, std::int64_t step);

  void store(const Transition& t) { memory_.store(t); }
  void store(std::span<const float> s, int a, double r, std::span<const float> s2, bool terminal) {
    memory_.store(s, a, r, s2, terminal);
  }

  /// Called once per environment step after storing that step's transition.
  /// Gradient update when memory >= warmup and step % train_every == 0;
  /// target sync when step % target_sync_every == 0.
  TickResult train_tick(std::int64_t global_step);

  void sync_target() { target_ = online_; }

  const AgentConfig& config() const { return cfg_; }
  const NetworkParams& online() const { return online_; }
  const NetworkParams& target() const { return target_; }
  NetworkParams& mutable_online() { return online_; }
  const OptimizerState& optimizer() const { return opt_; }
  const ReplayMemory& memory() const { return memory_; }
  std::int64_t updates() const { return updates_; }
  std::int64_t syncs() const { return syncs_; }

  void save(BinaryWriter& w) const;
  void load(BinaryReader& r);

 private:
  double update_online();

  AgentConfig cfg_;
  NetworkParams online_;
  NetworkParams target_;
  OptimizerState opt_;
  ReplayMemory memory_;
  Rng explore_rng_;
  Rng replay_rng_;
  std::int64_t updates_ = 0;
  std::int64_t syncs_ = 0;
};

}  // namespace semdrive
