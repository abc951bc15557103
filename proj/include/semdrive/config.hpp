#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semdrive/agent.hpp"
#include "semdrive/reward.hpp"
#include "semdrive/semantic_state.hpp"
#include "semdrive/sim.hpp"

namespace semdrive {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HarnessConfig {
  std::int64_t budget = 2'000'000;
  int max_episode_steps = 200;
  std::vector<ScenarioId> scenarios = {ScenarioId::kHighway};
  std::int64_t checkpoint_every = 100'000;
  std::int64_t metrics_window = 10'000;
  bool save_resume_state = false;
};

struct EvalConfig {
  int runs = 100;
  int max_steps = 1000;
  std::uint64_t seed = 7'000'000;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "runs/default";
  SimConfig sim;
  ScenarioConfig highway = default_scenario(ScenarioId::kHighway);
  ScenarioConfig merging = default_scenario(ScenarioId::kMerging);
  EncoderConfig encoder;
  RewardShape reward;
  RewardParams reward_weights;  // desired_speed is drawn per episode
  AgentConfig agent;
  HarnessConfig harness;
  EvalConfig eval;

  const ScenarioConfig& scenario(ScenarioId id) const {
    return id == ScenarioId::kHighway ? highway : merging;
  }
  ScenarioConfig& scenario(ScenarioId id) { return id == ScenarioId::kHighway ? highway : merging; }
};

nlohmann::json to_json(const RunConfig& cfg);

/// Strict conversion: required sections must be present, unknown keys are
/// rejected, values are range-checked. Errors name the offending field.
RunConfig from_json(const nlohmann::json& j);

/// Parses a config file; parse errors carry line and column.
nlohmann::json read_config_json(const std::filesystem::path& path);

/// Applies `key=value`. The key is a dotted path ("agent.gamma") or a leaf
/// name that occurs exactly once in the config ("budget").
void apply_override(nlohmann::json& j, const std::string& assignment);

/// read -> overrides -> from_json; SEMDRIVE_OUT_DIR replaces out_dir.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

void validate(const RunConfig& cfg);

/// Human-readable listing of every default with the origin of its value.
std::string describe_defaults();

/// Desk-scale highway setup: budget 300k steps with the step-count
/// hyperparameters (warmup, target sync, anneal, memory) scaled by the same
/// factor as the budget.
RunConfig desk_scale_config();

}  // namespace semdrive
