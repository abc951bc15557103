#include "semdrive/harness.hpp"

#include <cstdio>
#include <stdexcept>

#include "semdrive/binary_io.hpp"
#include "semdrive/checkpoint.hpp"
#include "semdrive/semantic_state.hpp"

namespace semdrive {

namespace fs = std::filesystem;

StartState randomize_start(TrafficScene& scene, Rng& rng, std::optional<double> fixed_theta_v) {
  const ScenarioConfig& c = scene.scenario;
  StartState st;
  st.departure_delay = rng.uniform_int(0, c.max_departure_delay);
  const int lanes = c.highway_lanes;
  const int drawn_lane = rng.uniform_int(0, lanes - 1);
  st.lane = c.on_ramp ? 0 : drawn_lane;
  st.speed = rng.uniform(c.start_speed_min, c.start_speed_max);
  const double drawn_theta = rng.uniform(c.theta_v_min, c.theta_v_max);
  st.theta_v = fixed_theta_v.value_or(drawn_theta);

  step_background_only(scene, st.departure_delay);
  place_ego(scene, st.lane, c.ego_start_s, st.speed);
  return st;
}

std::string format_metrics_row(const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%lld,%.6f,%.6f,%.6f,%.6f", static_cast<long long>(r.step),
                static_cast<long long>(r.episodes), r.collision_rate, r.rule_violation_ratio,
                r.mean_reward, r.epsilon);
  return buf;
}

Trainer::Trainer(RunConfig cfg)
    : cfg_(std::move(cfg)),
      agent_(cfg_.agent, static_cast<int>(input_dim(cfg_.encoder)), kNumActions, cfg_.seed),
      start_rng_(Rng::stream(cfg_.seed, RngStream::kStart)) {
  validate(cfg_);
}

void Trainer::set_scene(TrafficScene scene, double theta_v) {
  scene_ = std::move(scene);
  theta_v_ = theta_v;
  need_reset_ = false;
}

void Trainer::reset_simulation() {
  const auto& order = cfg_.harness.scenarios;
  const ScenarioId id = order[static_cast<std::size_t>(resets_ % static_cast<std::int64_t>(order.size()))];
  const std::uint64_t scene_seed = start_rng_.next_u64();
  scene_ = build_scenario(cfg_.scenario(id), cfg_.sim, scene_seed);
  theta_v_ = randomize_start(scene_, start_rng_).theta_v;
  ++resets_;
  need_reset_ = false;
}

EpisodeSummary Trainer::run_episode() {
  if (need_reset_) reset_simulation();

  EpisodeSummary summary;
  summary.index = episodes_;
  summary.scenario = scene_.scenario.id;
  summary.theta_v = theta_v_;

  RewardParams params = cfg_.reward_weights;
  params.desired_speed = theta_v_;
  std::vector<float> state = encode_scene(scene_, cfg_.encoder, theta_v_);

  while (global_step_ < cfg_.harness.budget) {
    StepRecord rec;
    rec.global_step = global_step_ + 1;
    rec.episode_step = summary.steps + 1;
    rec.action = action_from_index(agent_.act(state, global_step_));
    rec.events = step(scene_, rec.action);
    rec.flags = check_rules(scene_, cfg_.reward);
    const StateClass cls = classify(rec.events.collided(), rec.flags);
    rec.reward = compute_reward(cls, rec.flags, scene_, rec.action, params, cfg_.reward);
    rec.course_end = scene_.ego_past_course_end();
    rec.terminal = rec.events.collided();

    std::vector<float> next_state = encode_scene(scene_, cfg_.encoder, theta_v_);
    agent_.store(state, index_of(rec.action), rec.reward.total, next_state, rec.terminal);
    ++global_step_;
    rec.tick = agent_.train_tick(global_step_);

    ++summary.steps;
    summary.total_reward += rec.reward.total;
    if (rec.flags.counted_violation()) ++summary.rule_violation_steps;
    record_step(rec);
    if (on_step) on_step(rec, scene_);

    if (rec.terminal) {
      summary.terminal = true;
      break;
    }
    if (rec.course_end || summary.steps >= cfg_.harness.max_episode_steps) {
      summary.reset = true;
      summary.course_end = rec.course_end;
      need_reset_ = true;
      break;
    }
    state = std::move(next_state);
  }
  summary.truncated = !summary.terminal && !summary.reset;
  ++episodes_;
  return summary;
}

void Trainer::record_step(const StepRecord& rec) {
  ++win_steps_;
  if (rec.terminal) ++win_collisions_;
  if (rec.flags.counted_violation()) ++win_violations_;
  win_reward_ += rec.reward.total;
  if (global_step_ % cfg_.harness.metrics_window == 0) flush_window();
  if (global_step_ % cfg_.harness.checkpoint_every == 0 && metrics_out_.is_open()) {
    char name[32];
    std::snprintf(name, sizeof(name), "step_%09lld", static_cast<long long>(global_step_));
    write_checkpoint(name);
    if (cfg_.harness.save_resume_state) save_resume(fs::path(cfg_.out_dir) / "resume.bin");
  }
}

void Trainer::flush_window() {
  if (win_steps_ == 0) return;
  MetricsRow row;
  row.step = global_step_;
  // episodes finished so far, counting the one that ends on this step
  row.episodes = episodes_;
  const double n = static_cast<double>(win_steps_);
  row.collision_rate = 100.0 * static_cast<double>(win_collisions_) / n;
  row.rule_violation_ratio = 100.0 * static_cast<double>(win_violations_) / n;
  row.mean_reward = win_reward_ / n;
  row.epsilon = cfg_.agent.epsilon.at(global_step_);
  metrics_.push_back(row);
  if (metrics_out_.is_open()) metrics_out_ << format_metrics_row(row) << '\n' << std::flush;
  win_steps_ = win_collisions_ = win_violations_ = 0;
  win_reward_ = 0.0;
}

void Trainer::write_checkpoint(const std::string& name) const {
  Manifest extra;
  extra["lateral"] = std::to_string(cfg_.encoder.scope.lateral);
  extra["ahead"] = std::to_string(cfg_.encoder.scope.ahead);
  extra["behind"] = std::to_string(cfg_.encoder.scope.behind);
  extra["episodes"] = std::to_string(episodes_);
  extra["seed"] = std::to_string(cfg_.seed);
  save_checkpoint(fs::path(cfg_.out_dir) / "checkpoints" / name, agent_.online(), global_step_, extra);
}

void Trainer::train() {
  const fs::path out(cfg_.out_dir);
  std::error_code ec;
  fs::create_directories(out / "checkpoints", ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out.string() + ": " + ec.message());
  {
    std::ofstream cfg_out(out / "resolved_config.json");
    if (!cfg_out) throw std::runtime_error("cannot write to output directory " + out.string());
    cfg_out << to_json(cfg_).dump(2) << '\n';
  }
  const bool resuming = global_step_ > 0;
  metrics_out_.open(out / "metrics.csv", resuming ? std::ios::app : std::ios::trunc);
  if (!metrics_out_) throw std::runtime_error("cannot write metrics.csv in " + out.string());
  if (!resuming) metrics_out_ << kMetricsHeader << '\n';

  while (global_step_ < cfg_.harness.budget) run_episode();

  flush_window();
  write_checkpoint("final");
  if (cfg_.harness.save_resume_state) save_resume(out / "resume.bin");
  metrics_out_.close();
}

namespace {

constexpr std::uint64_t kResumeMagic = 0x53454d4452495645ull;  // "SEMDRIVE"

}  // namespace

void Trainer::save_resume(const fs::path& file) const {
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    BinaryWriter w(os);
    w.put(kResumeMagic);
    w.put(to_json(cfg_).dump());
    w.put(global_step_);
    w.put(episodes_);
    w.put(resets_);
    w.put(need_reset_);
    w.put(theta_v_);
    w.put(win_steps_);
    w.put(win_collisions_);
    w.put(win_violations_);
    w.put(win_reward_);
    w.put(start_rng_.state());
    w.put(scene_.scenario);
    w.put(scene_.sim);
    w.put(scene_.lanes);
    w.put(scene_.vehicles);
    w.put(scene_.time_step);
    w.put(scene_.next_vehicle_id);
    w.put(scene_.ego_prev_lane);
    w.put(scene_.ego_entered_ramp);
    w.put(scene_.traffic_rng.state());
    agent_.save(w);
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, file);
}

void Trainer::load_resume(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + file.string());
  BinaryReader r(is);
  if (r.get<std::uint64_t>() != kResumeMagic) throw std::runtime_error("not a resume snapshot");
  const auto saved_cfg = nlohmann::json::parse(r.get_string());
  // Budget and output paths may change between the two runs; nothing else.
  auto comparable = [](nlohmann::json j) {
    j.erase("out_dir");
    j["harness"].erase("budget");
    return j;
  };
  if (comparable(saved_cfg) != comparable(to_json(cfg_))) {
    throw std::runtime_error("resume snapshot was written with a different configuration");
  }
  global_step_ = r.get<std::int64_t>();
  episodes_ = r.get<std::int64_t>();
  resets_ = r.get<std::int64_t>();
  need_reset_ = r.get<bool>();
  theta_v_ = r.get<double>();
  win_steps_ = r.get<std::int64_t>();
  win_collisions_ = r.get<std::int64_t>();
  win_violations_ = r.get<std::int64_t>();
  win_reward_ = r.get<double>();
  start_rng_.set_state(r.get_string());
  scene_.scenario = r.get<ScenarioConfig>();
  scene_.sim = r.get<SimConfig>();
  scene_.lanes = r.get_vector<LaneSegment>();
  scene_.vehicles = r.get_vector<Vehicle>();
  scene_.time_step = r.get<std::int64_t>();
  scene_.next_vehicle_id = r.get<int>();
  scene_.ego_prev_lane = r.get<int>();
  scene_.ego_entered_ramp = r.get<bool>();
  scene_.traffic_rng.set_state(r.get_string());
  agent_.load(r);
}

}  // namespace semdrive
