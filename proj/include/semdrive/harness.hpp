#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <vector>

#include "semdrive/agent.hpp"
#include "semdrive/config.hpp"
#include "semdrive/reward.hpp"
#include "semdrive/sim.hpp"

namespace semdrive {

struct StartState {
  int departure_delay = 0;
  int lane = 0;
  double speed = 0.0;
  double theta_v = 0.0;
};

/// Draws departure delay, lane, speed and desired speed uniformly from the
/// scenario ranges, lets background traffic run for the delay and places
/// the ego. Merging starts always use the on-ramp entry.
StartState randomize_start(TrafficScene& scene, Rng& rng,
                           std::optional<double> fixed_theta_v = std::nullopt);

/// Everything observable about one environment step.
struct StepRecord {
  std::int64_t global_step = 0;
  int episode_step = 0;
  Action action = Action::kDefault;
  StepEvents events;
  RuleFlags flags;
  RewardBreakdown reward;
  bool terminal = false;
  bool course_end = false;
  TickResult tick;
};

struct EpisodeSummary {
  std::int64_t index = 0;
  ScenarioId scenario = ScenarioId::kHighway;
  double theta_v = 0.0;
  int steps = 0;
  bool terminal = false;    // ended in a collision; simulation continues in place
  bool reset = false;       // timeout or course end; simulation was reset
  bool course_end = false;
  bool truncated = false;   // step budget ran out mid-episode
  double total_reward = 0.0;
  int rule_violation_steps = 0;
};

struct MetricsRow {
  std::int64_t step = 0;
  std::int64_t episodes = 0;
  double collision_rate = 0.0;        // percent of window steps ending in a collision
  double rule_violation_ratio = 0.0;  // percent of window steps with safe-distance / pass-right flags
  double mean_reward = 0.0;
  double epsilon = 0.0;
};

/// Training loop state: scene, agent, counters and the run's RNG streams.
class Trainer {
 public:
  explicit Trainer(RunConfig cfg);

  /// Runs one episode. A collision ends it with a terminal transition and
  /// the next episode continues in the same scene; hitting the step cap or
  /// the course end ends it non-terminally and resets the simulation.
  EpisodeSummary run_episode();

  /// Runs until the step budget is spent, writing metrics.csv, checkpoints
  /// and resolved_config.json under cfg.out_dir.
  void train();

  /// Replaces the current scene (scripted scenarios in tests).
  void set_scene(TrafficScene scene, double theta_v);

  void save_resume(const std::filesystem::path& file) const;
  void load_resume(const std::filesystem::path& file);

  const RunConfig& config() const { return cfg_; }
  std::int64_t global_step() const { return global_step_; }
  std::int64_t episodes() const { return episodes_; }
  std::int64_t resets() const { return resets_; }
  const TrafficScene& scene() const { return scene_; }
  double theta_v() const { return theta_v_; }
  ScenarioId active_scenario() const { return scene_.scenario.id; }
  DqnAgent& agent() { return agent_; }
  const DqnAgent& agent() const { return agent_; }
  const std::vector<MetricsRow>& metrics() const { return metrics_; }

  /// Called after every environment step.
  std::function<void(const StepRecord&, const TrafficScene&)> on_step;

 private:
  void reset_simulation();
  void record_step(const StepRecord& rec);
  void flush_window();
  void write_checkpoint(const std::string& name) const;

  RunConfig cfg_;
  DqnAgent agent_;
  Rng start_rng_;
  TrafficScene scene_;
  double theta_v_ = 0.0;
  bool need_reset_ = true;
  std::int64_t global_step_ = 0;
  std::int64_t episodes_ = 0;
  std::int64_t resets_ = 0;

  // current metrics window
  std::int64_t win_steps_ = 0;
  std::int64_t win_collisions_ = 0;
  std::int64_t win_violations_ = 0;
  double win_reward_ = 0.0;
  std::vector<MetricsRow> metrics_;
  std::ofstream metrics_out_;
};

std::string format_metrics_row(const MetricsRow& row);
inline constexpr const char* kMetricsHeader =
    "step,episodes,collision_rate_window,rule_violation_ratio_window,mean_reward_window,epsilon";

}  // namespace semdrive
