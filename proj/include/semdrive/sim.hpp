#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "semdrive/rng.hpp"

namespace semdrive {

enum class ScenarioId { kHighway, kMerging };

std::string_view to_string(ScenarioId id);
ScenarioId scenario_from_string(std::string_view name);

enum class LaneType { kNormal, kAcceleration };

/// Ego maneuvers. The numeric value is the Q-network output index.
enum class Action : int {
  kAccelerate = 0,
  kDecelerate = 1,
  kLaneChangeLeft = 2,
  kLaneChangeRight = 3,
  kDefault = 4,
};
inline constexpr int kNumActions = 5;

std::string_view to_string(Action a);
inline int index_of(Action a) { return static_cast<int>(a); }
Action action_from_index(int index);
inline bool is_lane_change(Action a) {
  return a == Action::kLaneChangeLeft || a == Action::kLaneChangeRight;
}

/// A lane over a longitudinal interval. Lane index 0 is the rightmost lane.
struct LaneSegment {
  int id = 0;
  int index = 0;
  LaneType type = LaneType::kNormal;
  double start_s = 0.0;
  double end_s = 0.0;
  /// True when end_s is a real lane ending (on-ramp), false when it is only
  /// the edge of the simulated stretch.
  bool terminates = false;

  bool contains(double s) const { return s >= start_s && s < end_s; }
};

struct Vehicle {
  int id = 0;
  double s = 0.0;      // center position along the road axis [m]
  double v = 0.0;      // longitudinal speed [m/s]
  int lane = 0;
  double d = 0.0;      // lateral offset from lane center [m]
  double phi = 0.0;    // heading relative to lane axis [rad]
  double length = 5.0;
  double desired_speed = 0.0;  // background driver target, unused for ego
  bool is_ego = false;
};

struct IdmParams {
  double max_accel = 1.5;
  double comfort_decel = 2.0;
  double time_headway = 1.5;
  double min_gap = 2.0;
  double exponent = 4.0;
  /// Emergency braking bound applied to the IDM output.
  double max_decel = 9.0;
};

struct SimConfig {
  double dt = 1.0;
  double accel_cmd = 2.0;
  double v_max = 40.0;
  double lane_width = 3.5;
  double vehicle_length = 5.0;
  /// Road and traffic continue this far past the course end so the ego
  /// never sees the world stop.
  double despawn_margin = 150.0;
  IdmParams idm;
};

struct ScenarioConfig {
  ScenarioId id = ScenarioId::kHighway;
  double course_length = 1000.0;
  int highway_lanes = 3;
  bool on_ramp = false;
  double ramp_start = 50.0;
  double ramp_end = 300.0;
  double density = 10.0;  // background vehicles per km and lane
  double speed_min = 18.0;
  double speed_max = 28.0;
  double lane_speed_step = 2.0;  // extra desired speed per lane to the left
  double theta_v_min = 22.2;
  double theta_v_max = 31.9;
  double ego_start_s = 100.0;
  double start_speed_min = 10.0;
  double start_speed_max = 32.0;
  int max_departure_delay = 30;
  double start_clear_ahead = 25.0;
  double start_clear_behind = 40.0;
};

ScenarioConfig default_scenario(ScenarioId id);

/// Throws std::invalid_argument on inconsistent values.
void validate(const ScenarioConfig& cfg, const SimConfig& sim);

enum class CollisionKind { kVehicle, kOffRoad, kRampEnd };
std::string_view to_string(CollisionKind kind);

struct CollisionEvent {
  CollisionKind kind = CollisionKind::kVehicle;
  int other_id = -1;  // vehicle id for kVehicle, -1 otherwise
};

struct StepEvents {
  std::vector<CollisionEvent> collisions;
  int spawned = 0;
  int despawned = 0;

  bool collided() const { return !collisions.empty(); }
};

/// Full simulator ground truth for one scenario instance.
struct TrafficScene {
  ScenarioConfig scenario;
  SimConfig sim;
  std::vector<LaneSegment> lanes;
  std::vector<Vehicle> vehicles;
  std::int64_t time_step = 0;
  int next_vehicle_id = 1;
  /// Ego lane at the start of the last step; lets collision detection tell a
  /// refused lane change from an executed one.
  int ego_prev_lane = 0;
  /// Ego moved onto an acceleration lane from the highway.
  bool ego_entered_ramp = false;
  Rng traffic_rng;

  const Vehicle& ego() const;
  Vehicle& ego();
  /// Lane with the given index covering position s, or nullptr.
  const LaneSegment* lane_at(int index, double s) const;
  int max_lane_index() const;
  double course_end() const { return scenario.course_length; }
  bool ego_past_course_end() const { return ego().s >= scenario.course_length; }
};

/// Builds lanes, populates background traffic and places the ego at the
/// scenario's nominal start (rightmost lane, mid start speed).
TrafficScene build_scenario(const ScenarioConfig& cfg, const SimConfig& sim,
                            std::uint64_t seed);

/// Removes the ego and inserts it at `s` on `lane` with speed `v`, clearing
/// background vehicles from the start window on that lane.
void place_ego(TrafficScene& scene, int lane, double s, double v);

/// Advances every vehicle by one decision interval, then detects and
/// resolves collisions. Background vehicles involved in an overlap are
/// removed; an ego stuck past the ramp end is moved onto the highway.
StepEvents step(TrafficScene& scene, Action ego_action);

/// Advances traffic only (ego absent from the road); used for departure delays.
void step_background_only(TrafficScene& scene, int steps);

/// IDM update of one background vehicle against its current lane leader.
Vehicle background_driver_step(const TrafficScene& scene, const Vehicle& vehicle);

double idm_acceleration(const IdmParams& p, double v, double desired_speed,
                        double gap, double leader_v, bool has_leader);

/// Ballistic integration of constant acceleration over dt with 0 <= v <= v_max.
void integrate_longitudinal(double& s, double& v, double accel, double dt, double v_max);

/// Collisions present in the scene after a step in which the ego attempted
/// `attempted`.
std::vector<CollisionEvent> detect_collision(const TrafficScene& scene, Action attempted);

bool bodies_overlap(const Vehicle& a, const Vehicle& b);

/// Nearest vehicle (ego included) whose center is strictly ahead of `v` on
/// its lane, ties broken by id, or nullptr.
const Vehicle* lane_leader(const TrafficScene& scene, const Vehicle& v);

}  // namespace semdrive
