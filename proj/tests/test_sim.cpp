#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "semdrive/sim.hpp"

using namespace semdrive;
using fixtures::add_vehicle;
using fixtures::open_road;

namespace {

bool no_same_lane_overlap(const TrafficScene& scene) {
  for (std::size_t i = 0; i < scene.vehicles.size(); ++i) {
    for (std::size_t j = i + 1; j < scene.vehicles.size(); ++j) {
      const auto& a = scene.vehicles[i];
      const auto& b = scene.vehicles[j];
      if (a.lane == b.lane && bodies_overlap(a, b)) return false;
    }
  }
  return true;
}

// Bisection on the IDM equilibrium condition a(v, gap, dv=0) = 0, written
// from the closed-form law without calling the simulator.
double equilibrium_gap(const IdmParams& p, double v, double v0) {
  auto accel = [&](double gap) {
    const double s_star = p.min_gap + v * p.time_headway;
    return p.max_accel * (1.0 - std::pow(v / v0, p.exponent) - (s_star / gap) * (s_star / gap));
  };
  double lo = 0.1, hi = 1e4;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (accel(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("highway scenario has three lanes, an ego and no overlaps") {
  TrafficScene scene = build_scenario(default_scenario(ScenarioId::kHighway), SimConfig{}, 7);
  CHECK(scene.lanes.size() == 3);
  CHECK(std::count_if(scene.vehicles.begin(), scene.vehicles.end(), [](auto& v) { return v.is_ego; }) == 1);
  CHECK(scene.vehicles.size() > 1);
  CHECK(no_same_lane_overlap(scene));
}

TEST_CASE("merging scenario has exactly one finite acceleration lane at index 0") {
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    TrafficScene scene = build_scenario(default_scenario(ScenarioId::kMerging), SimConfig{}, seed);
    int accel = 0;
    for (const auto& l : scene.lanes) {
      if (l.type == LaneType::kAcceleration) {
        ++accel;
        CHECK(l.index == 0);
        CHECK(l.terminates);
        CHECK(std::isfinite(l.end_s));
        CHECK(l.end_s > l.start_s);
      }
    }
    CHECK(accel == 1);
  }
}

TEST_CASE("zero density yields a scene with only the ego") {
  ScenarioConfig c = default_scenario(ScenarioId::kHighway);
  c.density = 0;
  TrafficScene scene = build_scenario(c, SimConfig{}, 0);
  CHECK(scene.vehicles.size() == 1);
  CHECK(scene.vehicles.front().is_ego);
}

TEST_CASE("invalid scenario configs are rejected") {
  ScenarioConfig c = default_scenario(ScenarioId::kHighway);
  c.course_length = 0;
  CHECK_THROWS_AS(build_scenario(c, SimConfig{}, 1), std::invalid_argument);
  c = default_scenario(ScenarioId::kHighway);
  c.density = 500;  // 2 m spacing, shorter than a car
  CHECK_THROWS_AS(build_scenario(c, SimConfig{}, 1), std::invalid_argument);
}

TEST_CASE("ego kinematics per action") {
  SUBCASE("default holds speed") {
    TrafficScene scene = open_road(3, 1, 100, 20);
    step(scene, Action::kDefault);
    CHECK(scene.ego().s == doctest::Approx(120));
    CHECK(scene.ego().v == doctest::Approx(20));
  }
  SUBCASE("accelerate integrates constant acceleration") {
    TrafficScene scene = open_road(3, 1, 100, 20);
    step(scene, Action::kAccelerate);
    CHECK(scene.ego().v == doctest::Approx(22));
    CHECK(scene.ego().s == doctest::Approx(121));
  }
  SUBCASE("decelerate stops at zero, never reverses") {
    TrafficScene scene = open_road(3, 1, 100, 1);
    step(scene, Action::kDecelerate);
    CHECK(scene.ego().v == 0.0);
    CHECK(scene.ego().s == doctest::Approx(100.25));
    step(scene, Action::kDecelerate);
    CHECK(scene.ego().s == doctest::Approx(100.25));
  }
  SUBCASE("speed clamps at v_max") {
    TrafficScene scene = open_road(3, 1, 100, 39);
    step(scene, Action::kAccelerate);
    CHECK(scene.ego().v == 40.0);
    // 0.5 s to reach 40 m/s, then 0.5 s at 40 m/s
    CHECK(scene.ego().s == doctest::Approx(100 + 39 * 0.5 + 0.5 * 2 * 0.25 + 20));
  }
  SUBCASE("lane change switches index and keeps speed") {
    TrafficScene scene = open_road(3, 1, 100, 20);
    auto ev = step(scene, Action::kLaneChangeLeft);
    CHECK_FALSE(ev.collided());
    CHECK(scene.ego().lane == 2);
    CHECK(scene.ego().v == doctest::Approx(20));
  }
}

TEST_CASE("lane change off the road is an off-road collision") {
  TrafficScene scene = open_road(3, 0, 100, 20);
  auto ev = step(scene, Action::kLaneChangeRight);
  REQUIRE(ev.collided());
  CHECK(ev.collisions.front().kind == CollisionKind::kOffRoad);
  CHECK(scene.ego().lane == 0);

  TrafficScene left = open_road(3, 2, 100, 20);
  ev = step(left, Action::kLaneChangeLeft);
  REQUIRE(ev.collided());
  CHECK(ev.collisions.front().kind == CollisionKind::kOffRoad);
}

TEST_CASE("overlap detection uses center +- length/2 intervals") {
  TrafficScene scene = open_road(3, 1, 100, 0);
  add_vehicle(scene, 1, 103, 0);
  auto hits = detect_collision(scene, Action::kDefault);
  REQUIRE(hits.size() == 1);
  CHECK(hits.front().kind == CollisionKind::kVehicle);

  TrafficScene touching = open_road(3, 1, 100, 0);
  add_vehicle(touching, 1, 105, 0);
  CHECK(detect_collision(touching, Action::kDefault).empty());

  TrafficScene other_lane = open_road(3, 1, 100, 0);
  add_vehicle(other_lane, 2, 100, 0);
  CHECK(detect_collision(other_lane, Action::kDefault).empty());
}

TEST_CASE("collision detection is independent of vehicle order") {
  TrafficScene scene = open_road(3, 1, 100, 0);
  add_vehicle(scene, 1, 103, 0);
  add_vehicle(scene, 1, 97.5, 0);
  add_vehicle(scene, 2, 100, 0);
  const auto a = detect_collision(scene, Action::kDefault);
  std::reverse(scene.vehicles.begin(), scene.vehicles.end());
  const auto b = detect_collision(scene, Action::kDefault);
  REQUIRE(a.size() == 2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].other_id == b[i].other_id);
  CHECK(bodies_overlap(scene.vehicles[0], scene.vehicles[1]) ==
        bodies_overlap(scene.vehicles[1], scene.vehicles[0]));
}

TEST_CASE("staying on the acceleration lane past its end is a ramp-end collision") {
  TrafficScene scene = fixtures::merging_road(290, 20);
  auto ev = step(scene, Action::kDefault);
  REQUIRE(ev.collided());
  CHECK(ev.collisions.front().kind == CollisionKind::kRampEnd);
  CHECK(scene.ego().lane == 1);  // resolved onto the highway
}

TEST_CASE("ego alone with non-lane-change actions never collides and keeps speed on default") {
  TrafficScene scene = open_road(3, 1, 0, 17.5);
  for (int i = 0; i < 40; ++i) {
    const Action a = i % 3 == 0 ? Action::kAccelerate : (i % 3 == 1 ? Action::kDecelerate : Action::kDefault);
    CHECK_FALSE(step(scene, a).collided());
  }
  const double v = scene.ego().v;
  for (int i = 0; i < 50; ++i) step(scene, Action::kDefault);
  CHECK(scene.ego().v == v);
}

TEST_CASE("IDM: free road accelerates toward desired speed") {
  TrafficScene scene = open_road(3, 2, 100, 20);
  const int id = add_vehicle(scene, 0, 300, 10, 25);
  const Vehicle& v = *std::find_if(scene.vehicles.begin(), scene.vehicles.end(), [&](auto& x) { return x.id == id; });
  const Vehicle next = background_driver_step(scene, v);
  CHECK(next.v > 10);
  CHECK(next.lane == 0);
  CHECK(idm_acceleration(IdmParams{}, 25, 25, 0, 0, false) == doctest::Approx(0));
}

TEST_CASE("IDM: equilibrium gap from bisection gives near-zero acceleration") {
  const IdmParams p;
  for (double v : {10.0, 20.0, 25.0}) {
    const double v0 = 30.0;
    const double gap = equilibrium_gap(p, v, v0);
    CHECK(std::abs(idm_acceleration(p, v, v0, gap, v, true)) < 0.05);
  }
}

TEST_CASE("IDM: approaching a stopped leader never produces overlap") {
  for (double v0 : {15.0, 25.0, 30.0}) {
    TrafficScene scene = open_road(3, 2, 900, 0);
    add_vehicle(scene, 0, 400, 0, 0);
    const int follower = add_vehicle(scene, 0, 400 - 5 - 2 - v0 * 4, v0, v0);
    for (int i = 0; i < 120; ++i) {
      step(scene, Action::kDecelerate);
      const auto& vs = scene.vehicles;
      const Vehicle* f = nullptr;
      const Vehicle* l = nullptr;
      for (auto& v : vs) {
        if (v.id == follower) f = &v;
        if (v.id == follower - 1) l = &v;
      }
      REQUIRE(f != nullptr);
      REQUIRE(l != nullptr);
      CHECK(l->s - f->s - 5.0 > 0.0);
      CHECK(f->v >= 0.0);
    }
  }
}

TEST_CASE("stepping is deterministic and background traffic stays in lane without teleporting") {
  TrafficScene a = build_scenario(default_scenario(ScenarioId::kHighway), SimConfig{}, 42);
  TrafficScene b = build_scenario(default_scenario(ScenarioId::kHighway), SimConfig{}, 42);
  const double bound = 40.0 * 1.0 + 0.5 * 9.0 * 1.0;
  for (int t = 0; t < 200; ++t) {
    const Action act = action_from_index(t % 5 == 2 ? 4 : t % 5);
    const auto before = a.vehicles;
    step(a, act);
    step(b, act);
    REQUIRE(a.vehicles.size() == b.vehicles.size());
    for (std::size_t i = 0; i < a.vehicles.size(); ++i) {
      CHECK(a.vehicles[i].s == b.vehicles[i].s);
      CHECK(a.vehicles[i].v == b.vehicles[i].v);
      CHECK(a.vehicles[i].v >= 0.0);
    }
    for (const auto& old : before) {
      if (old.is_ego) continue;
      for (const auto& now : a.vehicles) {
        if (now.id != old.id) continue;
        CHECK(now.lane == old.lane);
        CHECK(now.s >= old.s);
        CHECK(now.s - old.s <= bound);
      }
    }
  }
}

TEST_CASE("vehicles past the course end plus margin are despawned and arrivals appear") {
  TrafficScene scene = build_scenario(default_scenario(ScenarioId::kHighway), SimConfig{}, 5);
  int spawned = 0, despawned = 0;
  for (int t = 0; t < 300; ++t) {
    auto ev = step(scene, Action::kDefault);
    spawned += ev.spawned;
    despawned += ev.despawned;
    for (const auto& v : scene.vehicles) {
      if (!v.is_ego) CHECK(v.s <= scene.scenario.course_length + scene.sim.despawn_margin);
    }
  }
  CHECK(spawned > 0);
  CHECK(despawned > 0);
}

TEST_CASE("action indices are fixed") {
  CHECK(index_of(Action::kAccelerate) == 0);
  CHECK(index_of(Action::kDecelerate) == 1);
  CHECK(index_of(Action::kLaneChangeLeft) == 2);
  CHECK(index_of(Action::kLaneChangeRight) == 3);
  CHECK(index_of(Action::kDefault) == 4);
  CHECK_THROWS(action_from_index(5));
}
