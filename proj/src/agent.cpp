#include "semdrive/agent.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace semdrive {

ReplayMemory::ReplayMemory(std::size_t capacity, std::size_t state_dim)
    : capacity_(capacity), dim_(state_dim) {
  if (capacity == 0) throw std::invalid_argument("replay memory capacity must be positive");
  if (state_dim == 0) throw std::invalid_argument("replay memory state_dim must be positive");
}

void ReplayMemory::store(const Transition& t) {
  store(t.state, t.action, t.reward, t.next_state, t.terminal);
}

void ReplayMemory::store(std::span<const float> state, int action, double reward,
                         std::span<const float> next_state, bool terminal) {
  if (state.size() != dim_ || next_state.size() != dim_) {
    throw std::invalid_argument("transition has " + std::to_string(state.size()) +
                                " state entries, memory expects " + std::to_string(dim_));
  }
  if (size_ < capacity_) {
    states_.insert(states_.end(), state.begin(), state.end());
    next_states_.insert(next_states_.end(), next_state.begin(), next_state.end());
    actions_.push_back(action);
    rewards_.push_back(reward);
    terminals_.push_back(terminal ? 1 : 0);
    ++size_;
  } else {
    std::copy(state.begin(), state.end(), states_.begin() + static_cast<std::ptrdiff_t>(head_ * dim_));
    std::copy(next_state.begin(), next_state.end(),
              next_states_.begin() + static_cast<std::ptrdiff_t>(head_ * dim_));
    actions_[head_] = action;
    rewards_[head_] = reward;
    terminals_[head_] = terminal ? 1 : 0;
  }
  head_ = (head_ + 1) % capacity_;
  ++insertions_;
}

std::size_t ReplayMemory::slot_of(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay index " + std::to_string(i));
  return size_ < capacity_ ? i : (head_ + i) % capacity_;
}

Transition ReplayMemory::at(std::size_t i) const {
  const std::size_t slot = slot_of(i);
  const auto s = state(slot);
  const auto s2 = next_state(slot);
  return {std::vector<float>(s.begin(), s.end()), actions_[slot], rewards_[slot],
          std::vector<float>(s2.begin(), s2.end()), terminals_[slot] != 0};
}

std::span<const float> ReplayMemory::state(std::size_t slot) const {
  return {states_.data() + slot * dim_, dim_};
}

std::span<const float> ReplayMemory::next_state(std::size_t slot) const {
  return {next_states_.data() + slot * dim_, dim_};
}

std::vector<std::size_t> ReplayMemory::sample_slots(std::size_t batch, Rng& rng) const {
  if (batch > size_) throw std::invalid_argument("batch larger than replay memory");
  std::vector<std::size_t> out;
  out.reserve(batch);
  while (out.size() < batch) {
    const auto slot = static_cast<std::size_t>(rng.uniform_index(size_));
    if (std::find(out.begin(), out.end(), slot) == out.end()) out.push_back(slot);
  }
  return out;
}

void ReplayMemory::save(BinaryWriter& w) const {
  w.put<std::uint64_t>(capacity_);
  w.put<std::uint64_t>(dim_);
  w.put<std::uint64_t>(head_);
  w.put<std::uint64_t>(size_);
  w.put<std::uint64_t>(insertions_);
  w.put(states_);
  w.put(next_states_);
  w.put(actions_);
  w.put(rewards_);
  w.put(terminals_);
}

void ReplayMemory::load(BinaryReader& r) {
  const auto cap = r.get<std::uint64_t>();
  const auto dim = r.get<std::uint64_t>();
  if (cap != capacity_ || dim != dim_) throw std::runtime_error("replay memory shape mismatch");
  head_ = r.get<std::uint64_t>();
  size_ = r.get<std::uint64_t>();
  insertions_ = r.get<std::uint64_t>();
  states_ = r.get_vector<float>();
  next_states_ = r.get_vector<float>();
  actions_ = r.get_vector<int>();
  rewards_ = r.get_vector<double>();
  terminals_ = r.get_vector<std::uint8_t>();
}

double EpsilonSchedule::at(std::int64_t step) const {
  if (anneal_steps <= 0) return end;
  const double frac = static_cast<double>(step) / static_cast<double>(anneal_steps);
  return std::max(end, start - (start - end) * frac);
}

int argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of empty range");
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

int select_action(std::span<const double> q_values, double epsilon, Rng& rng) {
  // Both draws happen every call so the stream position does not depend on
  // the branch taken.
  const double u = rng.uniform();
  const auto random_action = static_cast<int>(rng.uniform_index(q_values.size()));
  return u < epsilon ? random_action : argmax(q_values);
}

void validate(const AgentConfig& c) {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (c.memory_capacity == 0) fail("agent.memory_capacity must be positive");
  if (c.batch_size == 0) fail("agent.batch_size must be positive");
  if (c.batch_size > c.memory_capacity) fail("agent.batch_size exceeds memory_capacity");
  if (c.train_every <= 0) fail("agent.train_every must be positive");
  if (c.target_sync_every <= 0) fail("agent.target_sync_every must be positive");
  if (c.gamma < 0 || c.gamma > 1) fail("agent.gamma must lie in [0, 1]");
  if (!(c.rmsprop.learning_rate > 0)) fail("agent.learning_rate must be positive");
  if (c.rmsprop.decay < 0 || c.rmsprop.decay >= 1) fail("agent.rms_decay must lie in [0, 1)");
  if (!(c.rmsprop.epsilon > 0)) fail("agent.rms_epsilon must be positive");
  if (c.epsilon.end < 0 || c.epsilon.start > 1 || c.epsilon.end > c.epsilon.start) {
    fail("agent epsilon schedule needs 0 <= end <= start <= 1");
  }
  for (int h : c.hidden) {
    if (h <= 0) fail("agent.hidden widths must be positive");
  }
}

std::vector<double> td_targets(const ReplayMemory& memory, std::span<const std::size_t> slots,
                               const NetworkParams& target, double gamma) {
  const auto dim = static_cast<Eigen::Index>(memory.state_dim());
  Eigen::MatrixXd next(dim, static_cast<Eigen::Index>(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto s2 = memory.next_state(slots[i]);
    for (Eigen::Index j = 0; j < dim; ++j) next(j, static_cast<Eigen::Index>(i)) = s2[static_cast<std::size_t>(j)];
  }
  const Eigen::MatrixXd q_next = forward_batch(target, next);
  std::vector<double> y(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double r = memory.reward(slots[i]);
    y[i] = memory.terminal(slots[i]) ? r : r + gamma * q_next.col(static_cast<Eigen::Index>(i)).maxCoeff();
  }
  return y;
}

DqnAgent::DqnAgent(const AgentConfig& cfg, int input_dim, int num_actions, std::uint64_t seed)
    : DqnAgent(cfg, init_q_network(input_dim, seed, cfg.hidden, num_actions), seed) {}

DqnAgent::DqnAgent(const AgentConfig& cfg, NetworkParams initial, std::uint64_t seed)
    : cfg_(cfg),
      online_(std::move(initial)),
      target_(online_),
      opt_(OptimizerState::for_params(online_)),
      memory_(cfg.memory_capacity, static_cast<std::size_t>(online_.input_dim())),
      explore_rng_(Rng::stream(seed, RngStream::kExploration)),
      replay_rng_(Rng::stream(seed, RngStream::kReplay)) {
  validate(cfg_);
}

Eigen::VectorXd DqnAgent::q_values(std::span<const float> state) const {
  return forward(online_, state);
}

int DqnAgent::greedy_action(std::span<const float> state) const {
  const Eigen::VectorXd q = q_values(state);
  return argmax(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())));
}

int DqnAgent::act(std::span<const float> state, std::int64_t step) {
  const Eigen::VectorXd q = q_values(state);
  return select_action(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())),
                       cfg_.epsilon.at(step), explore_rng_);
}

double DqnAgent::update_online() {
  const auto slots = memory_.sample_slots(cfg_.batch_size, replay_rng_);
  const std::vector<double> targets = td_targets(memory_, slots, target_, cfg_.gamma);
  const auto dim = static_cast<Eigen::Index>(memory_.state_dim());
  Eigen::MatrixXd inputs(dim, static_cast<Eigen::Index>(slots.size()));
  std::vector<int> actions(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto s = memory_.state(slots[i]);
    for (Eigen::Index j = 0; j < dim; ++j) inputs(j, static_cast<Eigen::Index>(i)) = s[static_cast<std::size_t>(j)];
    actions[i] = memory_.action(slots[i]);
  }
  double loss = 0.0;
  const Gradients g = batch_gradients(online_, inputs, actions, targets, cfg_.huber_delta, &loss);
  rmsprop_step(online_, opt_, g, cfg_.rmsprop);
  ++updates_;
  return loss;
}

TickResult DqnAgent::train_tick(std::int64_t global_step) {
  TickResult r;
  if (memory_.size() >= std::max(cfg_.warmup, cfg_.batch_size) && global_step % cfg_.train_every == 0) {
    r.loss = update_online();
    r.updated = true;
  }
  if (global_step % cfg_.target_sync_every == 0) {
    sync_target();
    ++syncs_;
    r.synced = true;
  }
  return r;
}

namespace {

void save_params(BinaryWriter& w, const NetworkParams& p) {
  w.put<std::uint64_t>(p.layers.size());
  for (const auto& l : p.layers) {
    w.put(l.weights);
    w.put(l.bias);
  }
}

NetworkParams load_params(BinaryReader& r) {
  NetworkParams p;
  const auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    DenseLayer l;
    l.weights = r.get_matrix();
    l.bias = r.get_vector_xd();
    p.layers.push_back(std::move(l));
  }
  return p;
}

}  // namespace

void DqnAgent::save(BinaryWriter& w) const {
  save_params(w, online_);
  save_params(w, target_);
  save_params(w, opt_.mean_square);
  memory_.save(w);
  w.put(explore_rng_.state());
  w.put(replay_rng_.state());
  w.put<std::int64_t>(updates_);
  w.put<std::int64_t>(syncs_);
}

void DqnAgent::load(BinaryReader& r) {
  online_ = load_params(r);
  target_ = load_params(r);
  opt_.mean_square = load_params(r);
  memory_.load(r);
  explore_rng_.set_state(r.get_string());
  replay_rng_.set_state(r.get_string());
  updates_ = r.get<std::int64_t>();
  syncs_ = r.get<std::int64_t>();
}

}  // namespace semdrive
