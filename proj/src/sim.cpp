#include "semdrive/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semdrive {

std::string_view to_string(ScenarioId id) {
  return id == ScenarioId::kHighway ? "highway" : "merging";
}

ScenarioId scenario_from_string(std::string_view name) {
  if (name == "highway") return ScenarioId::kHighway;
  if (name == "merging") return ScenarioId::kMerging;
  throw std::invalid_argument("unknown scenario '" + std::string(name) + "'");
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::kAccelerate: return "accelerate";
    case Action::kDecelerate: return "decelerate";
    case Action::kLaneChangeLeft: return "lane_change_left";
    case Action::kLaneChangeRight: return "lane_change_right";
    case Action::kDefault: return "default";
  }
  return "?";
}

Action action_from_index(int index) {
  if (index < 0 || index >= kNumActions) {
    throw std::out_of_range("action index " + std::to_string(index));
  }
  return static_cast<Action>(index);
}

std::string_view to_string(CollisionKind kind) {
  switch (kind) {
    case CollisionKind::kVehicle: return "vehicle";
    case CollisionKind::kOffRoad: return "off_road";
    case CollisionKind::kRampEnd: return "ramp_end";
  }
  return "?";
}

ScenarioConfig default_scenario(ScenarioId id) {
  ScenarioConfig c;
  c.id = id;
  if (id == ScenarioId::kMerging) {
    c.course_length = 600.0;
    c.highway_lanes = 2;
    c.on_ramp = true;
    c.ramp_start = 50.0;
    c.ramp_end = 300.0;
    c.density = 10.0;
    c.speed_min = 14.0;
    c.speed_max = 22.0;
    c.lane_speed_step = 2.0;
    c.theta_v_min = 11.1;
    c.theta_v_max = 22.2;
    c.ego_start_s = 60.0;
    c.start_speed_min = 8.0;
    c.start_speed_max = 16.0;
  }
  return c;
}

void validate(const ScenarioConfig& c, const SimConfig& sim) {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (!(sim.dt > 0)) fail("sim.dt must be positive");
  if (!(sim.v_max > 0)) fail("sim.v_max must be positive");
  if (!(sim.vehicle_length > 0)) fail("sim.vehicle_length must be positive");
  if (!(sim.lane_width > 0)) fail("sim.lane_width must be positive");
  if (!(sim.accel_cmd > 0)) fail("sim.accel_cmd must be positive");
  if (!(c.course_length > 0)) fail("course_length must be positive");
  if (c.highway_lanes < 1) fail("highway_lanes must be at least 1");
  if (c.density < 0) fail("density must be nonnegative");
  if (c.speed_min < 0 || c.speed_max < c.speed_min) fail("background speed range invalid");
  if (c.theta_v_max < c.theta_v_min) fail("theta_v range invalid");
  if (c.start_speed_min < 0 || c.start_speed_max < c.start_speed_min) {
    fail("start speed range invalid");
  }
  if (c.max_departure_delay < 0) fail("max_departure_delay must be nonnegative");
  if (c.on_ramp) {
    if (!(c.ramp_end > c.ramp_start) || c.ramp_start < 0) fail("ramp interval invalid");
    if (c.ego_start_s < c.ramp_start || c.ego_start_s >= c.ramp_end) {
      fail("ego_start_s must lie on the on-ramp");
    }
  }
  if (c.ego_start_s < 0 || c.ego_start_s >= c.course_length) {
    fail("ego_start_s must lie inside the course");
  }
  if (c.density > 0) {
    const double spacing = 1000.0 / c.density;
    if (spacing <= sim.vehicle_length + sim.idm.min_gap) {
      fail("density " + std::to_string(c.density) +
           " veh/km leaves no room for non-overlapping placement");
    }
  }
}

const Vehicle& TrafficScene::ego() const {
  for (const auto& v : vehicles) {
    if (v.is_ego) return v;
  }
  throw std::logic_error("scene has no ego vehicle");
}

Vehicle& TrafficScene::ego() {
  return const_cast<Vehicle&>(static_cast<const TrafficScene&>(*this).ego());
}

const LaneSegment* TrafficScene::lane_at(int index, double s) const {
  for (const auto& l : lanes) {
    if (l.index == index && l.contains(s)) return &l;
  }
  return nullptr;
}

int TrafficScene::max_lane_index() const {
  int m = 0;
  for (const auto& l : lanes) m = std::max(m, l.index);
  return m;
}

namespace {

int first_highway_lane(const ScenarioConfig& c) { return c.on_ramp ? 1 : 0; }

double sample_desired_speed(const ScenarioConfig& c, int lane, Rng& rng) {
  const double shift = c.lane_speed_step * (lane - first_highway_lane(c));
  return rng.uniform(c.speed_min, c.speed_max) + shift;
}

double lane_mean_speed(const ScenarioConfig& c, int lane) {
  return 0.5 * (c.speed_min + c.speed_max) + c.lane_speed_step * (lane - first_highway_lane(c));
}

double bumper_gap(const Vehicle& follower, const Vehicle& leader) {
  return (leader.s - follower.s) - 0.5 * (leader.length + follower.length);
}

const Vehicle* find_leader(const std::vector<Vehicle>& vehicles, const Vehicle& v,
                           bool skip_ego) {
  const Vehicle* best = nullptr;
  for (const auto& o : vehicles) {
    if (o.id == v.id || o.lane != v.lane) continue;
    if (skip_ego && o.is_ego) continue;
    if (!(o.s > v.s)) continue;
    if (best == nullptr || o.s < best->s || (o.s == best->s && o.id < best->id)) best = &o;
  }
  return best;
}

Vehicle idm_update(const std::vector<Vehicle>& vehicles, const SimConfig& sim,
                   const Vehicle& vehicle, bool skip_ego) {
  const Vehicle* leader = find_leader(vehicles, vehicle, skip_ego);
  const double accel =
      leader ? idm_acceleration(sim.idm, vehicle.v, vehicle.desired_speed,
                                bumper_gap(vehicle, *leader), leader->v, true)
             : idm_acceleration(sim.idm, vehicle.v, vehicle.desired_speed, 0.0, 0.0, false);
  Vehicle out = vehicle;
  integrate_longitudinal(out.s, out.v, accel, sim.dt, sim.v_max);
  return out;
}

// One Poisson arrival attempt per highway lane at the road entry, rejected
// when the entry gap is too short for the inserted speed.
int spawn_arrivals(TrafficScene& scene, bool ego_on_road) {
  const auto& c = scene.scenario;
  if (c.density <= 0) return 0;
  int spawned = 0;
  for (int lane = first_highway_lane(c); lane < first_highway_lane(c) + c.highway_lanes; ++lane) {
    const double rate = c.density / 1000.0 * lane_mean_speed(c, lane);
    const double p = 1.0 - std::exp(-rate * scene.sim.dt);
    const bool arrives = scene.traffic_rng.bernoulli(p);
    const double desired = sample_desired_speed(c, lane, scene.traffic_rng);
    if (!arrives) continue;

    Vehicle nv;
    nv.id = scene.next_vehicle_id;
    nv.lane = lane;
    nv.s = 0.0;
    nv.length = scene.sim.vehicle_length;
    nv.desired_speed = desired;
    nv.v = desired;
    const Vehicle* leader = find_leader(scene.vehicles, nv, !ego_on_road);
    if (leader != nullptr) {
      nv.v = std::min(desired, leader->v);
      const double needed = scene.sim.idm.min_gap + nv.v * scene.sim.idm.time_headway;
      if (bumper_gap(nv, *leader) < needed) continue;
    }
    ++scene.next_vehicle_id;
    scene.vehicles.push_back(nv);
    ++spawned;
  }
  return spawned;
}

int despawn(TrafficScene& scene) {
  const double limit = scene.scenario.course_length + scene.sim.despawn_margin;
  const auto before = scene.vehicles.size();
  std::erase_if(scene.vehicles, [&](const Vehicle& v) { return !v.is_ego && v.s > limit; });
  return static_cast<int>(before - scene.vehicles.size());
}

void remove_overlapping(TrafficScene& scene, const Vehicle& ego) {
  std::erase_if(scene.vehicles, [&](const Vehicle& v) {
    return !v.is_ego && v.lane == ego.lane && bodies_overlap(v, ego);
  });
}

}  // namespace

double idm_acceleration(const IdmParams& p, double v, double desired_speed, double gap,
                        double leader_v, bool has_leader) {
  const double v0 = std::max(desired_speed, 0.1);
  double accel = p.max_accel * (1.0 - std::pow(v / v0, p.exponent));
  if (has_leader) {
    const double dv = v - leader_v;
    const double s_star =
        p.min_gap + std::max(0.0, v * p.time_headway +
                                      v * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
    const double g = std::max(gap, 0.01);
    accel -= p.max_accel * (s_star / g) * (s_star / g);
  }
  return std::clamp(accel, -p.max_decel, p.max_accel);
}

void integrate_longitudinal(double& s, double& v, double accel, double dt, double v_max) {
  const double v_end = v + accel * dt;
  if (v_end < 0.0) {
    // stops inside the interval
    s += accel < 0.0 ? -v * v / (2.0 * accel) : 0.0;
    v = 0.0;
  } else if (v_end > v_max) {
    if (v >= v_max || accel <= 0.0) {
      s += v_max * dt;
    } else {
      const double t1 = (v_max - v) / accel;
      s += v * t1 + 0.5 * accel * t1 * t1 + v_max * (dt - t1);
    }
    v = v_max;
  } else {
    s += 0.5 * (v + v_end) * dt;
    v = v_end;
  }
}

bool bodies_overlap(const Vehicle& a, const Vehicle& b) {
  return std::abs(a.s - b.s) < 0.5 * (a.length + b.length);
}

const Vehicle* lane_leader(const TrafficScene& scene, const Vehicle& v) {
  return find_leader(scene.vehicles, v, false);
}

Vehicle background_driver_step(const TrafficScene& scene, const Vehicle& vehicle) {
  if (vehicle.is_ego) throw std::invalid_argument("background_driver_step called on ego");
  return idm_update(scene.vehicles, scene.sim, vehicle, false);
}

TrafficScene build_scenario(const ScenarioConfig& cfg, const SimConfig& sim, std::uint64_t seed) {
  validate(cfg, sim);
  TrafficScene scene;
  scene.scenario = cfg;
  scene.sim = sim;
  scene.traffic_rng = Rng::stream(seed, RngStream::kTraffic);

  const double road_end = cfg.course_length + sim.despawn_margin;
  int lane_id = 0;
  if (cfg.on_ramp) {
    scene.lanes.push_back(
        {lane_id++, 0, LaneType::kAcceleration, cfg.ramp_start, cfg.ramp_end, true});
  }
  for (int k = 0; k < cfg.highway_lanes; ++k) {
    scene.lanes.push_back(
        {lane_id++, first_highway_lane(cfg) + k, LaneType::kNormal, 0.0, road_end, false});
  }

  if (cfg.density > 0) {
    const double mean_spacing = 1000.0 / cfg.density;
    const double min_spacing = sim.vehicle_length + sim.idm.min_gap;
    for (int k = 0; k < cfg.highway_lanes; ++k) {
      const int lane = first_highway_lane(cfg) + k;
      double s = scene.traffic_rng.uniform(0.0, mean_spacing);
      while (s < road_end) {
        Vehicle v;
        v.id = scene.next_vehicle_id++;
        v.lane = lane;
        v.s = s;
        v.length = sim.vehicle_length;
        v.desired_speed = sample_desired_speed(cfg, lane, scene.traffic_rng);
        v.v = v.desired_speed;
        scene.vehicles.push_back(v);
        s += min_spacing + scene.traffic_rng.exponential(mean_spacing - min_spacing);
      }
    }
  }

  Vehicle ego;
  ego.id = 0;
  ego.is_ego = true;
  ego.length = sim.vehicle_length;
  ego.lane = 0;
  ego.s = cfg.ego_start_s;
  ego.v = 0.5 * (cfg.start_speed_min + cfg.start_speed_max);
  scene.vehicles.insert(scene.vehicles.begin(), ego);
  place_ego(scene, ego.lane, ego.s, ego.v);
  return scene;
}

void place_ego(TrafficScene& scene, int lane, double s, double v) {
  if (scene.lane_at(lane, s) == nullptr) {
    throw std::invalid_argument("no lane " + std::to_string(lane) + " at s=" + std::to_string(s));
  }
  Vehicle& ego = scene.ego();
  ego.lane = lane;
  ego.s = s;
  ego.v = std::clamp(v, 0.0, scene.sim.v_max);
  ego.d = 0.0;
  ego.phi = 0.0;
  scene.ego_prev_lane = lane;
  scene.ego_entered_ramp = false;
  const double ahead = scene.scenario.start_clear_ahead;
  const double behind = scene.scenario.start_clear_behind;
  std::erase_if(scene.vehicles, [&](const Vehicle& o) {
    return !o.is_ego && o.lane == lane && o.s - s < ahead + o.length && s - o.s < behind + o.length;
  });
}

void step_background_only(TrafficScene& scene, int steps) {
  for (int i = 0; i < steps; ++i) {
    std::vector<Vehicle> next = scene.vehicles;
    for (auto& v : next) {
      if (!v.is_ego) v = idm_update(scene.vehicles, scene.sim, v, true);
    }
    scene.vehicles = std::move(next);
    spawn_arrivals(scene, false);
    despawn(scene);
    ++scene.time_step;
  }
}

std::vector<CollisionEvent> detect_collision(const TrafficScene& scene, Action attempted) {
  std::vector<CollisionEvent> out;
  const Vehicle& ego = scene.ego();

  if (is_lane_change(attempted) && ego.lane == scene.ego_prev_lane) {
    out.push_back({CollisionKind::kOffRoad, -1});
  }
  const LaneSegment* here = scene.lane_at(ego.lane, ego.s);
  if (here == nullptr) {
    for (const auto& l : scene.lanes) {
      if (l.index == ego.lane && l.terminates && ego.s >= l.end_s) {
        out.push_back({CollisionKind::kRampEnd, -1});
        break;
      }
    }
  }
  std::vector<const Vehicle*> hits;
  for (const auto& o : scene.vehicles) {
    if (!o.is_ego && o.lane == ego.lane && bodies_overlap(ego, o)) hits.push_back(&o);
  }
  std::sort(hits.begin(), hits.end(), [](auto* a, auto* b) { return a->id < b->id; });
  for (const auto* o : hits) out.push_back({CollisionKind::kVehicle, o->id});
  return out;
}

StepEvents step(TrafficScene& scene, Action ego_action) {
  const SimConfig& sim = scene.sim;
  StepEvents events;

  // All accelerations come from the pre-step state.
  std::vector<Vehicle> next = scene.vehicles;
  for (auto& v : next) {
    if (v.is_ego) continue;
    v = idm_update(scene.vehicles, sim, v, false);
  }

  Vehicle& ego = *std::find_if(next.begin(), next.end(), [](const Vehicle& v) { return v.is_ego; });
  scene.ego_prev_lane = ego.lane;
  double accel = 0.0;
  if (ego_action == Action::kAccelerate) accel = sim.accel_cmd;
  if (ego_action == Action::kDecelerate) accel = -sim.accel_cmd;
  integrate_longitudinal(ego.s, ego.v, accel, sim.dt, sim.v_max);

  if (is_lane_change(ego_action)) {
    const int target = ego.lane + (ego_action == Action::kLaneChangeLeft ? 1 : -1);
    const LaneSegment* lane = scene.lane_at(target, ego.s);
    if (lane != nullptr) {
      ego.lane = target;
      scene.ego_entered_ramp = lane->type == LaneType::kAcceleration;
    }
  }
  const LaneSegment* cur = scene.lane_at(ego.lane, ego.s);
  if (cur != nullptr && cur->type != LaneType::kAcceleration) scene.ego_entered_ramp = false;

  scene.vehicles = std::move(next);
  ++scene.time_step;

  events.collisions = detect_collision(scene, ego_action);

  // Resolution: overlapping background vehicles leave the simulation, an ego
  // past the ramp end is put onto the adjacent highway lane.
  for (const auto& c : events.collisions) {
    if (c.kind == CollisionKind::kRampEnd) {
      Vehicle& e = scene.ego();
      e.lane += 1;
      scene.ego_entered_ramp = false;
    }
  }
  if (events.collided()) remove_overlapping(scene, scene.ego());

  events.spawned = spawn_arrivals(scene, true);
  events.despawned = despawn(scene);
  return events;
}

}  // namespace semdrive
