#pragma once

#include <string_view>

#include "semdrive/sim.hpp"

namespace semdrive {

/// Reward parameterization: one weight per penalty term plus the desired
/// speed that drives the behavior adaptation feature.
struct RewardParams {
  double w_collision = 1.0;
  double w_pass_right = 1.0;
  double w_not_enter = 1.0;
  double w_safe_distance = 1.0;
  double w_keep_right = 1.0;
  double w_action = 1.0;
  double desired_speed = 25.0;
};

/// Fixed magnitudes and rule thresholds.
struct RewardShape {
  double r_collision = -1.0;
  double rule_penalty = -0.5;
  double velocity_max = 1.0;
  double omega_cap = 10.0;
  double action_penalty = -0.05;
  double safe_time_headway = 1.8;
  double pass_right_window = 20.0;
  double keep_right_ahead = 40.0;
  double keep_right_behind = 20.0;
};

void validate(const RewardShape& shape, const RewardParams& params);

enum class StateClass { kCollision, kRuleViolation, kNominal };
std::string_view to_string(StateClass c);

struct RuleFlags {
  bool pass_right = false;
  bool not_enter = false;
  bool safe_distance = false;
  bool keep_right = false;

  bool any() const { return pass_right || not_enter || safe_distance || keep_right; }
  /// The subset reported as rule-violation time in evaluations.
  bool counted_violation() const { return safe_distance || pass_right; }
};

RuleFlags check_rules(const TrafficScene& scene, const RewardShape& shape);

StateClass classify(bool collided, const RuleFlags& flags);

struct RewardBreakdown {
  StateClass state_class = StateClass::kNominal;
  double total = 0.0;
  double collision = 0.0;
  double pass_right = 0.0;
  double not_enter = 0.0;
  double safe_distance = 0.0;
  double keep_right = 0.0;
  double action = 0.0;
  double velocity = 0.0;
};

double velocity_reward(double omega, const RewardShape& shape);

/// Prioritized reward: a collision masks every other term, a rule violation
/// masks the driving-style terms.
RewardBreakdown compute_reward(StateClass state_class, const RuleFlags& flags,
                               const TrafficScene& scene, Action action,
                               const RewardParams& params, const RewardShape& shape);

}  // namespace semdrive
