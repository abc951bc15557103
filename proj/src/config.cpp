#include "semdrive/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace semdrive {

using nlohmann::json;

namespace {

json scenario_json(const ScenarioConfig& c) {
  return {{"course_length", c.course_length},
          {"highway_lanes", c.highway_lanes},
          {"on_ramp", c.on_ramp},
          {"ramp_start", c.ramp_start},
          {"ramp_end", c.ramp_end},
          {"density", c.density},
          {"speed_min", c.speed_min},
          {"speed_max", c.speed_max},
          {"lane_speed_step", c.lane_speed_step},
          {"theta_v_min", c.theta_v_min},
          {"theta_v_max", c.theta_v_max},
          {"ego_start_s", c.ego_start_s},
          {"start_speed_min", c.start_speed_min},
          {"start_speed_max", c.start_speed_max},
          {"max_departure_delay", c.max_departure_delay},
          {"start_clear_ahead", c.start_clear_ahead},
          {"start_clear_behind", c.start_clear_behind}};
}

// Walks one JSON object, remembering which keys were read so leftovers can
// be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  static Section required(const json& parent, const std::string& key, const std::string& path) {
    if (!parent.contains(key)) throw ConfigError("missing required section '" + path + "'");
    return Section(parent.at(key), path);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key) + ": wrong type");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void mark(const std::string& key) { seen_.insert(key); }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : kEmpty, field(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError(field(k) + ": unknown key");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_scenario(Section s, ScenarioConfig& c) {
  s.read("course_length", c.course_length);
  s.read("highway_lanes", c.highway_lanes);
  s.read("on_ramp", c.on_ramp);
  s.read("ramp_start", c.ramp_start);
  s.read("ramp_end", c.ramp_end);
  s.read("density", c.density);
  s.read("speed_min", c.speed_min);
  s.read("speed_max", c.speed_max);
  s.read("lane_speed_step", c.lane_speed_step);
  s.read("theta_v_min", c.theta_v_min);
  s.read("theta_v_max", c.theta_v_max);
  s.read("ego_start_s", c.ego_start_s);
  s.read("start_speed_min", c.start_speed_min);
  s.read("start_speed_max", c.start_speed_max);
  s.read("max_departure_delay", c.max_departure_delay);
  s.read("start_clear_ahead", c.start_clear_ahead);
  s.read("start_clear_behind", c.start_clear_behind);
  s.finish();
}

void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

void collect_leaves(const json& j, const std::string& prefix, const std::string& leaf,
                    std::vector<std::string>& out) {
  if (!j.is_object()) return;
  for (const auto& [k, v] : j.items()) {
    const std::string path = prefix.empty() ? k : prefix + "." + k;
    if (k == leaf) out.push_back(path);
    collect_leaves(v, path, leaf, out);
  }
}

}  // namespace

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["sim"] = {{"dt", c.sim.dt},
              {"accel_cmd", c.sim.accel_cmd},
              {"v_max", c.sim.v_max},
              {"lane_width", c.sim.lane_width},
              {"vehicle_length", c.sim.vehicle_length},
              {"despawn_margin", c.sim.despawn_margin},
              {"idm",
               {{"max_accel", c.sim.idm.max_accel},
                {"comfort_decel", c.sim.idm.comfort_decel},
                {"time_headway", c.sim.idm.time_headway},
                {"min_gap", c.sim.idm.min_gap},
                {"exponent", c.sim.idm.exponent},
                {"max_decel", c.sim.idm.max_decel}}}};
  j["scenarios"] = {{"highway", scenario_json(c.highway)}, {"merging", scenario_json(c.merging)}};
  const auto& n = c.encoder.norm;
  j["encoder"] = {{"lateral", c.encoder.scope.lateral},
                  {"ahead", c.encoder.scope.ahead},
                  {"behind", c.encoder.scope.behind},
                  {"sensor_range", c.encoder.sensor_range},
                  {"norm",
                   {{"v_max", n.v_max},
                    {"half_lane_width", n.half_lane_width},
                    {"heading_scale", n.heading_scale},
                    {"lane_end_cap", n.lane_end_cap},
                    {"lane_index_scale", n.lane_index_scale},
                    {"sentinel", n.sentinel}}}};
  const auto& w = c.reward_weights;
  const auto& r = c.reward;
  j["reward"] = {{"weights",
                  {{"collision", w.w_collision},
                   {"pass_right", w.w_pass_right},
                   {"not_enter", w.w_not_enter},
                   {"safe_distance", w.w_safe_distance},
                   {"keep_right", w.w_keep_right},
                   {"action", w.w_action}}},
                 {"r_collision", r.r_collision},
                 {"rule_penalty", r.rule_penalty},
                 {"velocity_max", r.velocity_max},
                 {"omega_cap", r.omega_cap},
                 {"action_penalty", r.action_penalty},
                 {"safe_time_headway", r.safe_time_headway},
                 {"pass_right_window", r.pass_right_window},
                 {"keep_right_ahead", r.keep_right_ahead},
                 {"keep_right_behind", r.keep_right_behind}};
  const auto& a = c.agent;
  j["agent"] = {{"memory_capacity", a.memory_capacity},
                {"warmup", a.warmup},
                {"batch_size", a.batch_size},
                {"train_every", a.train_every},
                {"target_sync_every", a.target_sync_every},
                {"gamma", a.gamma},
                {"huber_delta", a.huber_delta},
                {"learning_rate", a.rmsprop.learning_rate},
                {"rms_decay", a.rmsprop.decay},
                {"rms_epsilon", a.rmsprop.epsilon},
                {"epsilon_start", a.epsilon.start},
                {"epsilon_end", a.epsilon.end},
                {"epsilon_anneal_steps", a.epsilon.anneal_steps},
                {"hidden", a.hidden}};
  std::vector<std::string> names;
  for (auto id : c.harness.scenarios) names.emplace_back(to_string(id));
  j["harness"] = {{"budget", c.harness.budget},
                  {"max_episode_steps", c.harness.max_episode_steps},
                  {"scenarios", names},
                  {"checkpoint_every", c.harness.checkpoint_every},
                  {"metrics_window", c.harness.metrics_window},
                  {"save_resume_state", c.harness.save_resume_state}};
  j["eval"] = {{"runs", c.eval.runs}, {"max_steps", c.eval.max_steps}, {"seed", c.eval.seed}};
  return j;
}

RunConfig from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  root.read("seed", c.seed);
  root.read("out_dir", c.out_dir);

  {
    Section s = root.child("sim");
    s.read("dt", c.sim.dt);
    s.read("accel_cmd", c.sim.accel_cmd);
    s.read("v_max", c.sim.v_max);
    s.read("lane_width", c.sim.lane_width);
    s.read("vehicle_length", c.sim.vehicle_length);
    s.read("despawn_margin", c.sim.despawn_margin);
    Section idm = s.child("idm");
    idm.read("max_accel", c.sim.idm.max_accel);
    idm.read("comfort_decel", c.sim.idm.comfort_decel);
    idm.read("time_headway", c.sim.idm.time_headway);
    idm.read("min_gap", c.sim.idm.min_gap);
    idm.read("exponent", c.sim.idm.exponent);
    idm.read("max_decel", c.sim.idm.max_decel);
    idm.finish();
    s.finish();
  }
  {
    Section s = Section::required(j, "scenarios", "scenarios");
    if (s.has("highway")) read_scenario(s.child("highway"), c.highway);
    if (s.has("merging")) read_scenario(s.child("merging"), c.merging);
    s.finish();
  }
  {
    Section s = Section::required(j, "encoder", "encoder");
    s.read("lateral", c.encoder.scope.lateral);
    s.read("ahead", c.encoder.scope.ahead);
    s.read("behind", c.encoder.scope.behind);
    s.read("sensor_range", c.encoder.sensor_range);
    Section n = s.child("norm");
    n.read("v_max", c.encoder.norm.v_max);
    n.read("half_lane_width", c.encoder.norm.half_lane_width);
    n.read("heading_scale", c.encoder.norm.heading_scale);
    n.read("lane_end_cap", c.encoder.norm.lane_end_cap);
    n.read("lane_index_scale", c.encoder.norm.lane_index_scale);
    n.read("sentinel", c.encoder.norm.sentinel);
    n.finish();
    s.finish();
  }
  {
    Section s = Section::required(j, "reward", "reward");
    Section w = s.child("weights");
    w.read("collision", c.reward_weights.w_collision);
    w.read("pass_right", c.reward_weights.w_pass_right);
    w.read("not_enter", c.reward_weights.w_not_enter);
    w.read("safe_distance", c.reward_weights.w_safe_distance);
    w.read("keep_right", c.reward_weights.w_keep_right);
    w.read("action", c.reward_weights.w_action);
    w.finish();
    s.read("r_collision", c.reward.r_collision);
    s.read("rule_penalty", c.reward.rule_penalty);
    s.read("velocity_max", c.reward.velocity_max);
    s.read("omega_cap", c.reward.omega_cap);
    s.read("action_penalty", c.reward.action_penalty);
    s.read("safe_time_headway", c.reward.safe_time_headway);
    s.read("pass_right_window", c.reward.pass_right_window);
    s.read("keep_right_ahead", c.reward.keep_right_ahead);
    s.read("keep_right_behind", c.reward.keep_right_behind);
    s.finish();
  }
  {
    Section s = Section::required(j, "agent", "agent");
    auto& a = c.agent;
    s.read("memory_capacity", a.memory_capacity);
    s.read("warmup", a.warmup);
    s.read("batch_size", a.batch_size);
    s.read("train_every", a.train_every);
    s.read("target_sync_every", a.target_sync_every);
    s.read("gamma", a.gamma);
    s.read("huber_delta", a.huber_delta);
    s.read("learning_rate", a.rmsprop.learning_rate);
    s.read("rms_decay", a.rmsprop.decay);
    s.read("rms_epsilon", a.rmsprop.epsilon);
    s.read("epsilon_start", a.epsilon.start);
    s.read("epsilon_end", a.epsilon.end);
    s.read("epsilon_anneal_steps", a.epsilon.anneal_steps);
    s.read("hidden", a.hidden);
    s.finish();
  }
  {
    Section s = Section::required(j, "harness", "harness");
    auto& h = c.harness;
    s.read("budget", h.budget);
    s.read("max_episode_steps", h.max_episode_steps);
    std::vector<std::string> names;
    for (auto id : h.scenarios) names.emplace_back(to_string(id));
    s.read("scenarios", names);
    h.scenarios.clear();
    for (const auto& n : names) {
      try {
        h.scenarios.push_back(scenario_from_string(n));
      } catch (const std::invalid_argument& e) {
        throw ConfigError("harness.scenarios: " + std::string(e.what()));
      }
    }
    s.read("checkpoint_every", h.checkpoint_every);
    s.read("metrics_window", h.metrics_window);
    s.read("save_resume_state", h.save_resume_state);
    s.finish();
  }
  {
    Section s = root.child("eval");
    s.read("runs", c.eval.runs);
    s.read("max_steps", c.eval.max_steps);
    s.read("seed", c.eval.seed);
    s.finish();
  }
  for (const char* key : {"scenarios", "encoder", "reward", "agent", "harness"}) {
    root.mark(key);
  }
  root.finish();
  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  auto wrap = [](const std::string& section, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(section + ": " + e.what());
    }
  };
  wrap("scenarios.highway", [&] { validate(c.highway, c.sim); });
  wrap("scenarios.merging", [&] { validate(c.merging, c.sim); });
  wrap("encoder", [&] { validate(c.encoder); });
  wrap("reward", [&] { validate(c.reward, c.reward_weights); });
  wrap("agent", [&] { validate(c.agent); });
  check(c.highway.on_ramp == false, "scenarios.highway.on_ramp", "highway has no on-ramp");
  check(c.merging.on_ramp == true, "scenarios.merging.on_ramp", "merging needs the on-ramp");
  check(c.harness.budget > 0, "harness.budget", "must be positive");
  check(c.harness.max_episode_steps > 0, "harness.max_episode_steps", "must be positive");
  check(!c.harness.scenarios.empty(), "harness.scenarios", "needs at least one scenario");
  check(c.harness.checkpoint_every > 0, "harness.checkpoint_every", "must be positive");
  check(c.harness.metrics_window > 0, "harness.metrics_window", "must be positive");
  check(c.eval.runs > 0, "eval.runs", "must be positive");
  check(c.eval.max_steps > 0, "eval.max_steps", "must be positive");
}

json read_config_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  if (key.find('.') == std::string::npos && !j.contains(key)) {
    std::vector<std::string> matches;
    collect_leaves(to_json(RunConfig{}), "", key, matches);
    if (matches.size() != 1) {
      throw ConfigError("override key '" + key + "' is " +
                        (matches.empty() ? "unknown" : "ambiguous; use a dotted path"));
    }
    key = matches.front();
  }

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }

  json* node = &j;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
    if (!node->is_object()) throw ConfigError("override path '" + key + "' crosses a non-object");
  }
  (*node)[parts.back()] = value;
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  json j = read_config_json(path);
  for (const auto& o : overrides) apply_override(j, o);
  RunConfig c = from_json(j);
  if (const char* env = std::getenv("SEMDRIVE_OUT_DIR"); env != nullptr && *env != '\0') {
    c.out_dir = env;
  }
  return c;
}

std::string describe_defaults() {
  // Origin of each value: "published" = the published DQN training setup,
  // "chosen" = a simulator or encoding choice made here.
  static const std::vector<std::pair<std::string, std::string>> notes = {
      {"agent.memory_capacity", "published: replay memory holds 500,000 transitions"},
      {"agent.warmup", "published: updates start after 50,000 stored transitions"},
      {"agent.batch_size", "published: minibatch of 32"},
      {"agent.train_every", "published: one update every 4th step"},
      {"agent.target_sync_every", "published: target network copied every 50,000 steps"},
      {"agent.gamma", "published: discount 0.9"},
      {"agent.learning_rate", "published: RMSProp learning rate 1e-5"},
      {"agent.rms_decay", "published: RMSProp decay 0.95"},
      {"agent.rms_epsilon", "chosen: division guard"},
      {"agent.epsilon_start", "published: exploration starts at 1"},
      {"agent.epsilon_end", "published: exploration floor 0.1"},
      {"agent.epsilon_anneal_steps", "published: linear anneal over 500,000 steps"},
      {"agent.hidden", "published: hidden widths 512-512-256-64"},
      {"agent.huber_delta", "chosen: Huber loss threshold"},
      {"harness.budget", "published: 2 million training steps"},
      {"harness.max_episode_steps", "published: 200 steps per episode"},
      {"harness.checkpoint_every", "chosen"},
      {"harness.metrics_window", "chosen: smoothing window for training curves"},
      {"scenarios.highway.theta_v_min", "published: 80 km/h"},
      {"scenarios.highway.theta_v_max", "published: 115 km/h"},
      {"scenarios.merging.theta_v_min", "published: 40 km/h"},
      {"scenarios.merging.theta_v_max", "published: 80 km/h"},
      {"encoder.lateral", "published: two lanes to each side"},
      {"encoder.ahead", "published: two vehicles ahead per lane"},
      {"encoder.behind", "published: one vehicle behind per lane"},
      {"eval.runs", "published: 100 evaluation runs"},
  };
  std::ostringstream os;
  std::function<void(const json&, const std::string&)> walk = [&](const json& j,
                                                                  const std::string& prefix) {
    for (const auto& [k, v] : j.items()) {
      const std::string path = prefix.empty() ? k : prefix + "." + k;
      if (v.is_object()) {
        walk(v, path);
        continue;
      }
      std::string note = "chosen";
      for (const auto& [p, n] : notes) {
        if (p == path) note = n;
      }
      os << path << " = " << v.dump() << "  # " << note << '\n';
    }
  };
  walk(to_json(RunConfig{}), "");
  return os.str();
}

RunConfig desk_scale_config() {
  RunConfig c;
  constexpr double kScale = 300'000.0 / 2'000'000.0;
  c.harness.budget = 300'000;
  c.harness.scenarios = {ScenarioId::kHighway};
  c.harness.checkpoint_every = 100'000;
  c.agent.epsilon.anneal_steps = 75'000;
  c.agent.warmup = static_cast<std::size_t>(50'000 * kScale);
  c.agent.target_sync_every = static_cast<std::int64_t>(50'000 * kScale);
  c.agent.memory_capacity = static_cast<std::size_t>(500'000 * kScale);
  c.out_dir = "runs/desk_highway";
  return c;
}

}  // namespace semdrive
