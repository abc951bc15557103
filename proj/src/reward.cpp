#include "semdrive/reward.hpp"

#include <cmath>
#include <stdexcept>

#include "semdrive/semantic_state.hpp"

namespace semdrive {

std::string_view to_string(StateClass c) {
  switch (c) {
    case StateClass::kCollision: return "collision";
    case StateClass::kRuleViolation: return "rule_violation";
    case StateClass::kNominal: return "nominal";
  }
  return "?";
}

void validate(const RewardShape& shape, const RewardParams& p) {
  for (double w : {p.w_collision, p.w_pass_right, p.w_not_enter, p.w_safe_distance,
                   p.w_keep_right, p.w_action}) {
    if (!std::isfinite(w) || w < 0) {
      throw std::invalid_argument("reward weights must be finite and nonnegative");
    }
  }
  if (!(shape.omega_cap > 0)) throw std::invalid_argument("reward.omega_cap must be positive");
  if (shape.safe_time_headway < 0 || shape.pass_right_window < 0 || shape.keep_right_ahead < 0 ||
      shape.keep_right_behind < 0) {
    throw std::invalid_argument("reward thresholds must be nonnegative");
  }
}

RuleFlags check_rules(const TrafficScene& scene, const RewardShape& shape) {
  RuleFlags f;
  const Vehicle& ego = scene.ego();
  const LaneSegment* here = scene.lane_at(ego.lane, ego.s);
  const bool on_ramp = here != nullptr && here->type == LaneType::kAcceleration;

  f.not_enter = on_ramp && scene.ego_entered_ramp;

  if (!on_ramp) {
    for (const auto& o : scene.vehicles) {
      if (o.is_ego || o.lane <= ego.lane) continue;
      if (std::abs(o.s - ego.s) <= shape.pass_right_window && ego.v > o.v) {
        f.pass_right = true;
        break;
      }
    }
  }

  if (const Vehicle* leader = lane_leader(scene, ego)) {
    const double gap = (leader->s - ego.s) - 0.5 * (leader->length + ego.length);
    f.safe_distance = gap < shape.safe_time_headway * ego.v;
  }

  const LaneSegment* right = scene.lane_at(ego.lane - 1, ego.s);
  if (right != nullptr && right->type == LaneType::kNormal) {
    bool free = true;
    for (const auto& o : scene.vehicles) {
      if (o.is_ego || o.lane != right->index) continue;
      const double ds = o.s - ego.s;
      if (ds >= -shape.keep_right_behind && ds <= shape.keep_right_ahead) {
        free = false;
        break;
      }
    }
    f.keep_right = free;
  }
  return f;
}

StateClass classify(bool collided, const RuleFlags& flags) {
  if (collided) return StateClass::kCollision;
  if (flags.any()) return StateClass::kRuleViolation;
  return StateClass::kNominal;
}

double velocity_reward(double omega, const RewardShape& shape) {
  return shape.velocity_max * std::max(0.0, 1.0 - std::abs(omega) / shape.omega_cap);
}

RewardBreakdown compute_reward(StateClass state_class, const RuleFlags& flags,
                               const TrafficScene& scene, Action action,
                               const RewardParams& p, const RewardShape& shape) {
  RewardBreakdown r;
  r.state_class = state_class;
  switch (state_class) {
    case StateClass::kCollision:
      r.collision = p.w_collision * shape.r_collision;
      r.total = r.collision;
      break;
    case StateClass::kRuleViolation:
      if (flags.pass_right) r.pass_right = p.w_pass_right * shape.rule_penalty;
      if (flags.not_enter) r.not_enter = p.w_not_enter * shape.rule_penalty;
      if (flags.safe_distance) r.safe_distance = p.w_safe_distance * shape.rule_penalty;
      if (flags.keep_right) r.keep_right = p.w_keep_right * shape.rule_penalty;
      r.total = r.pass_right + r.not_enter + r.safe_distance + r.keep_right;
      break;
    case StateClass::kNominal:
      r.action = action == Action::kDefault ? 0.0 : p.w_action * shape.action_penalty;
      r.velocity = velocity_reward(behavior_adaptation(scene, p.desired_speed), shape);
      r.total = r.action + r.velocity;
      break;
  }
  return r;
}

}  // namespace semdrive
