#pragma once

#include "semdrive/sim.hpp"

namespace fixtures {

using namespace semdrive;

// Straight road with `lanes` normal lanes, no background traffic and the ego
// at (lane, s, v).
inline TrafficScene open_road(int lanes, int ego_lane, double ego_s, double ego_v,
                              std::uint64_t seed = 1) {
  ScenarioConfig c = default_scenario(ScenarioId::kHighway);
  c.highway_lanes = lanes;
  c.density = 0.0;
  c.ego_start_s = ego_s;
  TrafficScene scene = build_scenario(c, SimConfig{}, seed);
  place_ego(scene, ego_lane, ego_s, ego_v);
  return scene;
}

inline TrafficScene merging_road(double ego_s, double ego_v, std::uint64_t seed = 1) {
  ScenarioConfig c = default_scenario(ScenarioId::kMerging);
  c.density = 0.0;
  TrafficScene scene = build_scenario(c, SimConfig{}, seed);
  place_ego(scene, 0, ego_s, ego_v);
  return scene;
}

inline int add_vehicle(TrafficScene& scene, int lane, double s, double v, double desired = -1.0) {
  Vehicle veh;
  veh.id = scene.next_vehicle_id++;
  veh.lane = lane;
  veh.s = s;
  veh.v = v;
  veh.length = scene.sim.vehicle_length;
  veh.desired_speed = desired < 0 ? v : desired;
  scene.vehicles.push_back(veh);
  return veh.id;
}

// Two-lane road, ego on the right lane, five vehicles in sensor range: one
// alongside, one ahead and one behind on the left lane, two behind on the
// ego lane. Nothing ahead on the ego lane. Returns the id of the vehicle a
// (1,1,1) scope must drop.
inline int two_lane_constellation(TrafficScene& scene) {
  scene = open_road(2, 0, 100, 25);
  add_vehicle(scene, 1, 101, 26);
  add_vehicle(scene, 1, 130, 24);
  add_vehicle(scene, 1, 75, 27);
  add_vehicle(scene, 0, 80, 25);
  return add_vehicle(scene, 0, 50, 28);
}

}  // namespace fixtures
