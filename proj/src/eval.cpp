#include "semdrive/eval.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "semdrive/harness.hpp"
#include "semdrive/reward.hpp"
#include "semdrive/semantic_state.hpp"

namespace semdrive {

using nlohmann::json;

int scenario_lane_count(const RunConfig& cfg, ScenarioId id) {
  const ScenarioConfig& sc = cfg.scenario(id);
  return sc.highway_lanes + (sc.on_ramp ? 1 : 0);
}

std::vector<double> lane_distribution(const std::vector<RunTrace>& runs, int num_lanes) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_lanes), 0);
  std::int64_t total = 0;
  for (const auto& run : runs) {
    for (const auto& st : run.steps) {
      if (st.lane < 0 || st.lane >= num_lanes) {
        throw std::invalid_argument("trace lane " + std::to_string(st.lane) + " outside 0.." +
                                    std::to_string(num_lanes - 1));
      }
      ++counts[static_cast<std::size_t>(st.lane)];
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("lane distribution of an empty trace is undefined");
  std::vector<double> pct(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    pct[i] = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return pct;
}

EvalReport compute_report(const std::vector<RunTrace>& runs, const EvalSetting& setting, int num_lanes) {
  EvalReport r;
  r.scenario = setting.scenario;
  r.runs = static_cast<int>(runs.size());
  r.theta_v = setting.theta_v;
  r.empty = setting.empty;
  double distance_m = 0.0;
  double speed_sum = 0.0;
  std::int64_t violations = 0;
  for (const auto& run : runs) {
    if (run.collided) ++r.collisions;
    for (const auto& st : run.steps) {
      distance_m += st.distance;
      speed_sum += st.v;
      if (st.violation) ++violations;
      ++r.timesteps;
    }
  }
  if (r.runs == 0) throw std::invalid_argument("evaluation report needs at least one run");
  r.collision_rate = 100.0 * r.collisions / r.runs;
  r.total_distance_km = distance_m / 1000.0;
  r.no_collision = r.collisions == 0;
  r.avg_distance_between_collisions_km =
      r.no_collision ? r.total_distance_km : r.total_distance_km / r.collisions;
  if (r.timesteps > 0) {
    r.rule_violation_ratio = 100.0 * static_cast<double>(violations) / static_cast<double>(r.timesteps);
    r.avg_speed = speed_sum / static_cast<double>(r.timesteps);
    r.lane_distribution = lane_distribution(runs, num_lanes);
  } else {
    r.lane_distribution.assign(static_cast<std::size_t>(num_lanes), 0.0);
  }
  return r;
}

RunTrace run_greedy(const NetworkParams& params, const RunConfig& cfg, const EvalSetting& setting,
                    int run_index) {
  const auto expected = static_cast<int>(input_dim(cfg.encoder));
  if (params.input_dim() != expected) {
    throw InputDimMismatch("checkpoint expects " + std::to_string(params.input_dim()) +
                           " inputs but the encoder produces " + std::to_string(expected));
  }
  ScenarioConfig sc = cfg.scenario(setting.scenario);
  if (setting.empty) sc.density = 0.0;

  Rng rng = Rng::stream(setting.seed + static_cast<std::uint64_t>(run_index), RngStream::kEval);
  TrafficScene scene = build_scenario(sc, cfg.sim, rng.next_u64());
  const StartState start = randomize_start(scene, rng, setting.theta_v);

  RunTrace trace;
  trace.run = run_index;
  trace.theta_v = start.theta_v;
  for (int t = 0; t < setting.max_steps; ++t) {
    const std::vector<float> state = encode_scene(scene, cfg.encoder, start.theta_v);
    const Eigen::VectorXd q = forward(params, state);
    const Action a = action_from_index(argmax(std::span<const double>(q.data(), static_cast<std::size_t>(q.size()))));
    const double s_before = scene.ego().s;
    const StepEvents ev = step(scene, a);
    const RuleFlags flags = check_rules(scene, cfg.reward);
    const Vehicle& ego = scene.ego();

    TraceStep st;
    st.lane = ego.lane;
    st.s = ego.s;
    st.v = ego.v;
    st.distance = ego.s - s_before;
    st.action = a;
    st.violation = flags.counted_violation();
    st.collision = ev.collided();
    trace.steps.push_back(st);

    if (st.collision) {
      trace.collided = true;
      break;
    }
    if (scene.ego_past_course_end()) {
      trace.course_end = true;
      break;
    }
  }
  return trace;
}

EvalResult evaluate(const NetworkParams& params, const RunConfig& cfg, const EvalSetting& setting) {
  if (setting.runs <= 0) throw std::invalid_argument("evaluation needs runs > 0");
  if (setting.max_steps <= 0) throw std::invalid_argument("evaluation needs max_steps > 0");
  EvalResult result;
  result.runs.reserve(static_cast<std::size_t>(setting.runs));
  for (int i = 0; i < setting.runs; ++i) result.runs.push_back(run_greedy(params, cfg, setting, i));
  result.report = compute_report(result.runs, setting, scenario_lane_count(cfg, setting.scenario));
  return result;
}

std::vector<EvalReport> speed_sweep(const NetworkParams& params, const RunConfig& cfg,
                                    EvalSetting setting, const std::vector<double>& theta_values) {
  std::vector<EvalReport> out;
  for (double theta : theta_values) {
    setting.theta_v = theta;
    out.push_back(evaluate(params, cfg, setting).report);
  }
  return out;
}

json report_to_json(const EvalReport& r) {
  json j;
  j["scenario"] = std::string(to_string(r.scenario));
  j["runs"] = r.runs;
  j["theta_v"] = r.theta_v ? json(*r.theta_v) : json(nullptr);
  j["empty"] = r.empty;
  j["collisions"] = r.collisions;
  j["collision_rate"] = r.collision_rate;
  j["total_distance_km"] = r.total_distance_km;
  j["avg_distance_between_collisions_km"] = r.avg_distance_between_collisions_km;
  j["no_collision"] = r.no_collision;
  j["timesteps"] = r.timesteps;
  j["rule_violation_ratio"] = r.rule_violation_ratio;
  j["lane_distribution"] = r.lane_distribution;
  j["avg_speed"] = r.avg_speed;
  return j;
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  r.runs = j.at("runs").get<int>();
  if (!j.at("theta_v").is_null()) r.theta_v = j.at("theta_v").get<double>();
  r.empty = j.at("empty").get<bool>();
  r.collisions = j.at("collisions").get<int>();
  r.collision_rate = j.at("collision_rate").get<double>();
  r.total_distance_km = j.at("total_distance_km").get<double>();
  r.avg_distance_between_collisions_km = j.at("avg_distance_between_collisions_km").get<double>();
  r.no_collision = j.at("no_collision").get<bool>();
  r.timesteps = j.at("timesteps").get<std::int64_t>();
  r.rule_violation_ratio = j.at("rule_violation_ratio").get<double>();
  r.lane_distribution = j.at("lane_distribution").get<std::vector<double>>();
  r.avg_speed = j.at("avg_speed").get<double>();
  return r;
}

std::string report_csv_header(int num_lanes) {
  std::string h =
      "scenario,runs,theta_v,empty,collisions,collision_rate,total_distance_km,"
      "avg_distance_between_collisions_km,no_collision,timesteps,rule_violation_ratio";
  for (int i = 0; i < num_lanes; ++i) h += ",lane" + std::to_string(i);
  return h + ",avg_speed";
}

namespace {

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

}  // namespace

std::string report_csv_row(const EvalReport& r) {
  std::ostringstream os;
  os << to_string(r.scenario) << ',' << r.runs << ',' << (r.theta_v ? fmt(*r.theta_v) : "random") << ','
     << (r.empty ? 1 : 0) << ',' << r.collisions << ',' << fmt(r.collision_rate) << ','
     << fmt(r.total_distance_km) << ',' << fmt(r.avg_distance_between_collisions_km) << ','
     << (r.no_collision ? 1 : 0) << ',' << r.timesteps << ',' << fmt(r.rule_violation_ratio);
  for (double p : r.lane_distribution) os << ',' << fmt(p);
  os << ',' << fmt(r.avg_speed);
  return os.str();
}

std::string sweep_csv(const std::vector<std::string>& column_names,
                      const std::vector<std::vector<EvalReport>>& columns) {
  if (column_names.size() != columns.size()) throw std::invalid_argument("sweep column count mismatch");
  std::ostringstream os;
  os << "theta_v";
  for (const auto& name : column_names) os << ',' << name;
  os << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& first = columns.front()[i];
    os << fmt(first.theta_v.value_or(0.0));
    for (const auto& col : columns) os << ',' << fmt(col.at(i).avg_speed);
    os << '\n';
  }
  return os.str();
}

namespace {

constexpr const char* kTraceFormat = "semdrive-trace-v1";

json setting_to_json(const EvalSetting& s) {
  return {{"scenario", std::string(to_string(s.scenario))},
          {"runs", s.runs},
          {"max_steps", s.max_steps},
          {"seed", s.seed},
          {"theta_v", s.theta_v ? json(*s.theta_v) : json(nullptr)},
          {"empty", s.empty}};
}

EvalSetting setting_from_json(const json& j) {
  EvalSetting s;
  s.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  s.runs = j.at("runs").get<int>();
  s.max_steps = j.at("max_steps").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("theta_v").is_null()) s.theta_v = j.at("theta_v").get<double>();
  s.empty = j.at("empty").get<bool>();
  return s;
}

}  // namespace

void write_trace(std::ostream& os, const TraceHeader& h, const EvalResult& result) {
  json header = {{"type", "header"},
                 {"format", kTraceFormat},
                 {"setting", setting_to_json(h.setting)},
                 {"num_lanes", h.num_lanes},
                 {"input_dim", h.input_dim},
                 {"scope", {h.scope.lateral, h.scope.ahead, h.scope.behind}},
                 {"sensor_range", h.sensor_range},
                 {"checkpoint", h.checkpoint}};
  os << header.dump() << '\n';
  for (const auto& run : result.runs) {
    for (std::size_t t = 0; t < run.steps.size(); ++t) {
      const TraceStep& st = run.steps[t];
      json j = {{"type", "step"},
                {"run", run.run},
                {"t", t},
                {"lane", st.lane},
                {"s", st.s},
                {"v", st.v},
                {"distance", st.distance},
                {"action", std::string(to_string(st.action))},
                {"violation", st.violation},
                {"collision", st.collision}};
      os << j.dump() << '\n';
    }
    json end = {{"type", "run_end"},
                {"run", run.run},
                {"theta_v", run.theta_v},
                {"steps", run.steps.size()},
                {"collided", run.collided},
                {"course_end", run.course_end}};
    os << end.dump() << '\n';
  }
  json report = report_to_json(result.report);
  report["type"] = "report";
  os << report.dump() << '\n';
}

namespace {

Action action_from_name(const std::string& name) {
  for (int i = 0; i < kNumActions; ++i) {
    if (to_string(action_from_index(i)) == name) return action_from_index(i);
  }
  throw TraceError("unknown action '" + name + "'");
}

}  // namespace

LoadedTrace read_trace(std::istream& is) {
  LoadedTrace out;
  bool have_header = false;
  bool have_report = false;
  RunTrace current;
  bool run_open = false;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "trace line " + std::to_string(line_no) + ": ";
    if (have_report) throw TraceError(where + "content after the report record");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw TraceError(where + "malformed JSON (" + e.what() + ")");
    }
    try {
      const std::string type = j.at("type").get<std::string>();
      if (!have_header) {
        if (type != "header") throw TraceError(where + "expected header record");
        if (j.at("format").get<std::string>() != kTraceFormat) throw TraceError(where + "unknown trace format");
        out.header.setting = setting_from_json(j.at("setting"));
        out.header.num_lanes = j.at("num_lanes").get<int>();
        out.header.input_dim = j.at("input_dim").get<int>();
        const auto sc = j.at("scope").get<std::vector<int>>();
        if (sc.size() != 3) throw TraceError(where + "scope must have three entries");
        out.header.scope = {sc[0], sc[1], sc[2]};
        out.header.sensor_range = j.at("sensor_range").get<double>();
        out.header.checkpoint = j.at("checkpoint").get<std::string>();
        have_header = true;
      } else if (type == "step") {
        const int run = j.at("run").get<int>();
        if (!run_open) {
          current = RunTrace{};
          current.run = run;
          run_open = true;
        }
        if (run != current.run) throw TraceError(where + "step of run " + std::to_string(run) + " inside run " + std::to_string(current.run));
        if (j.at("t").get<std::size_t>() != current.steps.size()) throw TraceError(where + "step index out of sequence");
        TraceStep st;
        st.lane = j.at("lane").get<int>();
        st.s = j.at("s").get<double>();
        st.v = j.at("v").get<double>();
        st.distance = j.at("distance").get<double>();
        st.action = action_from_name(j.at("action").get<std::string>());
        st.violation = j.at("violation").get<bool>();
        st.collision = j.at("collision").get<bool>();
        current.steps.push_back(st);
      } else if (type == "run_end") {
        const int run = j.at("run").get<int>();
        if (!run_open) {
          current = RunTrace{};
          current.run = run;
        } else if (run != current.run) {
          throw TraceError(where + "run_end for run " + std::to_string(run) + " inside run " + std::to_string(current.run));
        }
        if (j.at("steps").get<std::size_t>() != current.steps.size()) throw TraceError(where + "run step count mismatch");
        current.theta_v = j.at("theta_v").get<double>();
        current.collided = j.at("collided").get<bool>();
        current.course_end = j.at("course_end").get<bool>();
        if (current.run != static_cast<int>(out.runs.size())) throw TraceError(where + "runs out of sequence");
        out.runs.push_back(std::move(current));
        run_open = false;
      } else if (type == "report") {
        if (run_open) throw TraceError(where + "report before run_end");
        out.embedded = report_from_json(j);
        have_report = true;
      } else {
        throw TraceError(where + "unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw TraceError(where + "bad record (" + e.what() + ")");
    }
  }
  if (!have_header) throw TraceError("trace is empty");
  if (!have_report) throw TraceError("trace is truncated: no report record");
  if (static_cast<int>(out.runs.size()) != out.header.setting.runs) {
    throw TraceError("trace holds " + std::to_string(out.runs.size()) + " runs, header announces " +
                     std::to_string(out.header.setting.runs));
  }
  return out;
}

LoadedTrace read_trace(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw TraceError("cannot open trace " + file.string());
  return read_trace(is);
}

}  // namespace semdrive
