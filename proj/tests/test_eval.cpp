#include <doctest.h>

#include <sstream>

#include "criteria.hpp"
#include "semdrive/eval.hpp"

using namespace semdrive;

namespace {

RunTrace make_run(int id, int n, int lane, double dist, bool collided, int violating = 0) {
  RunTrace r;
  r.run = id;
  r.theta_v = 25.0;
  for (int i = 0; i < n; ++i) {
    TraceStep st;
    st.lane = lane;
    st.s = 100.0 + i * dist;
    st.v = dist;
    st.distance = dist;
    st.violation = i < violating;
    r.steps.push_back(st);
  }
  r.collided = collided;
  if (collided) r.steps.back().collision = true;
  return r;
}

RunConfig small_net_config() {
  RunConfig cfg;
  cfg.agent.hidden = {16};
  return cfg;
}

}  // namespace

TEST_CASE("collision rate is the percent of runs ending in a collision") {
  std::vector<RunTrace> runs;
  for (int i = 0; i < 100; ++i) runs.push_back(make_run(i, 10, 0, 20.0, i == 3 || i == 50));
  const EvalReport r = compute_report(runs, EvalSetting{}, 3);
  CHECK(r.collisions == 2);
  CHECK(r.collision_rate == doctest::Approx(2.0));
  CHECK(r.timesteps == 1000);
  CHECK(r.total_distance_km == doctest::Approx(20.0));
  CHECK(r.avg_distance_between_collisions_km == doctest::Approx(10.0));
  CHECK_FALSE(r.no_collision);
  CHECK(r.avg_speed == doctest::Approx(20.0));
}

TEST_CASE("average distance between collisions") {
  // 196.74 km driven with two collisions
  std::vector<RunTrace> runs = {make_run(0, 1000, 0, 98.37, true), make_run(1, 1000, 0, 98.37, true)};
  const EvalReport r = compute_report(runs, EvalSetting{}, 3);
  CHECK(r.total_distance_km == doctest::Approx(196.74));
  CHECK(r.avg_distance_between_collisions_km == doctest::Approx(98.37));

  const EvalReport none = compute_report({make_run(0, 50, 0, 20.0, false)}, EvalSetting{}, 3);
  CHECK(none.no_collision);
  CHECK(none.avg_distance_between_collisions_km == doctest::Approx(1.0));
}

TEST_CASE("rule violation ratio pools timesteps across runs") {
  std::vector<RunTrace> runs = {make_run(0, 100, 0, 20, false, 2), make_run(1, 50, 1, 20, false, 1)};
  const EvalReport r = compute_report(runs, EvalSetting{}, 3);
  CHECK(r.rule_violation_ratio == doctest::Approx(2.0));  // 3 of 150
}

TEST_CASE("lane distribution") {
  std::vector<RunTrace> runs = {make_run(0, 60, 0, 20, false), make_run(1, 30, 1, 20, false),
                                make_run(2, 10, 2, 20, false)};
  const auto d = lane_distribution(runs, 3);
  CHECK(d == std::vector<double>{60.0, 30.0, 10.0});
  CHECK(criteria::right_lane_preference(d));
  CHECK_FALSE(criteria::right_lane_preference({40.0, 40.0, 20.0}));
  CHECK_FALSE(criteria::right_lane_preference({20.0, 30.0, 50.0}));

  const auto single = lane_distribution({make_run(0, 5, 2, 20, false)}, 3);
  CHECK(single == std::vector<double>{0.0, 0.0, 100.0});
  CHECK_THROWS(lane_distribution({}, 3));
  CHECK_THROWS(lane_distribution({make_run(0, 0, 0, 20, false)}, 3));
}

TEST_CASE("speed tracking predicate") {
  auto rep = [](double theta, double speed) {
    EvalReport r;
    r.theta_v = theta;
    r.avg_speed = speed;
    return r;
  };
  CHECK(criteria::speed_tracking({rep(12, 12.5), rep(17, 16.0), rep(22, 20.0)}, 2, 3.0));
  CHECK_FALSE(criteria::speed_tracking({rep(12, 16.0), rep(17, 17.0), rep(22, 20.0)}, 2, 3.0));
  CHECK_FALSE(criteria::speed_tracking({rep(12, 12.0), rep(17, 17.0), rep(22, 17.0)}, 2, 3.0));
}

TEST_CASE("greedy evaluation is deterministic per seed") {
  const RunConfig cfg = small_net_config();
  const NetworkParams p = init_q_network(input_dim(cfg.encoder), 3, cfg.agent.hidden);
  EvalSetting s;
  s.runs = 4;
  s.max_steps = 60;
  const EvalResult a = evaluate(p, cfg, s);
  const EvalResult b = evaluate(p, cfg, s);
  CHECK(report_to_json(a.report) == report_to_json(b.report));
  s.seed += 1;
  CHECK(report_to_json(evaluate(p, cfg, s).report) != report_to_json(a.report));
}

TEST_CASE("trace round trip reproduces the report exactly") {
  const RunConfig cfg = small_net_config();
  const NetworkParams p = init_q_network(input_dim(cfg.encoder), 4, cfg.agent.hidden);
  EvalSetting s;
  s.runs = 3;
  s.max_steps = 40;
  s.theta_v = 24.0;
  const EvalResult res = evaluate(p, cfg, s);
  TraceHeader h;
  h.setting = s;
  h.num_lanes = scenario_lane_count(cfg, s.scenario);
  h.input_dim = input_dim(cfg.encoder);
  h.scope = cfg.encoder.scope;
  h.sensor_range = cfg.encoder.sensor_range;
  h.checkpoint = "none";
  std::stringstream buf;
  write_trace(buf, h, res);
  const std::string text = buf.str();

  std::istringstream in(text);
  const LoadedTrace t = read_trace(in);
  CHECK(t.runs.size() == 3);
  const EvalReport again = compute_report(t.runs, t.header.setting, t.header.num_lanes);
  CHECK(report_to_json(again) == report_to_json(t.embedded));
  CHECK(report_to_json(again) == report_to_json(res.report));

  // drop the final report record
  const std::string cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  std::istringstream truncated(cut);
  CHECK_THROWS_AS(read_trace(truncated), TraceError);
  std::istringstream garbage("{\"type\":\"header\"\n");
  CHECK_THROWS_AS(read_trace(garbage), TraceError);
}

TEST_CASE("checkpoint with a different input width is rejected") {
  const RunConfig cfg = small_net_config();
  const NetworkParams p = init_q_network(input_dim(cfg.encoder) + 7, 5, cfg.agent.hidden);
  EvalSetting s;
  s.runs = 1;
  CHECK_THROWS_AS(evaluate(p, cfg, s), InputDimMismatch);
}

TEST_CASE("empty-road runs stay collision-free under a default-only policy") {
  RunConfig cfg = small_net_config();
  NetworkParams p = init_q_network(input_dim(cfg.encoder), 6, cfg.agent.hidden);
  p.layers.back().weights.setZero();
  p.layers.back().bias.setZero();
  p.layers.back().bias[index_of(Action::kDefault)] = 1.0;
  EvalSetting s;
  s.runs = 5;
  s.empty = true;
  const EvalResult r = evaluate(p, cfg, s);
  CHECK(r.report.collisions == 0);
  for (const auto& run : r.runs) CHECK(run.course_end);
}

TEST_CASE("negative control: an untrained network does not track desired speed") {
  const RunConfig cfg = small_net_config();
  const NetworkParams p = init_q_network(input_dim(cfg.encoder), 8, cfg.agent.hidden);
  EvalSetting s;
  s.runs = 5;
  s.empty = true;
  const auto sweep = speed_sweep(p, cfg, s, {12.0, 17.0, 22.0});
  CHECK_FALSE(criteria::speed_tracking(sweep, 2, 3.0));
}
