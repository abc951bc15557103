// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.
//
// usage: semdrive_acceptance [--desk-run DIR] [criterion...]
// The desk-scale run (criteria 7-9) is reused from DIR when its resolved
// config matches the desk config and a final checkpoint exists; otherwise it
// is trained into DIR first. SEMDRIVE_DESK_RUN sets the default DIR.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "criteria.hpp"
#include "dqn_checks.hpp"
#include "encoder_properties.hpp"
#include "fixtures.hpp"
#include "gradient_oracle.hpp"
#include "reward_grid.hpp"
#include "semdrive/checkpoint.hpp"
#include "semdrive/eval.hpp"
#include "semdrive/harness.hpp"

using namespace semdrive;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome encoder_suite() {
  const auto t0 = Clock::now();
  const auto hw = props::run_encoder_suite(ScenarioId::kHighway, 1000);
  const auto mg = props::run_encoder_suite(ScenarioId::kMerging, 1000);
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "violations highway=" << hw.total() << " merging=" << mg.total() << " scenes=" << hw.scenes + mg.scenes
     << " time=" << fmt("%.1f", secs) << "s";
  return {hw.total() == 0 && mg.total() == 0 && hw.scenes == 1000 && mg.scenes == 1000 && secs < 60.0, os.str()};
}

Outcome constellation() {
  TrafficScene scene;
  const int dropped = fixtures::two_lane_constellation(scene);
  EncoderConfig cfg;
  cfg.scope = {1, 1, 1};
  const ErModel er = build_er_model(scene, cfg.sensor_range);
  const auto slots = select_scope(er, cfg.scope);
  const StateTensor t = encode(er, slots, cfg, 25.0);
  const float sentinel = static_cast<float>(cfg.norm.sentinel);
  const int vehicles = static_cast<int>(std::count_if(slots.begin(), slots.end(), [&](const ScopeSlot& s) {
    return s.vehicle_id != scene.ego().id;
  }));
  const bool dropped_ok = std::none_of(slots.begin(), slots.end(), [&](const ScopeSlot& s) {
    return s.vehicle_id == dropped;
  });
  const int er_row = cfg.scope.ego_row();
  const int ahead_col = cfg.scope.ego_col() + 1;
  const bool ahead_ok = t.at(er_row, ahead_col, Layer::kMask) == 0.0f && t.at(er_row, ahead_col, Layer::kDs) == sentinel;
  bool right_ok = true;
  for (int c = 0; c < t.cols(); ++c) {
    right_ok = right_ok && t.at(er_row + 1, c, Layer::kLaneType) == sentinel && t.at(er_row + 1, c, Layer::kMask) == 0.0f;
  }
  std::ostringstream os;
  os << "selected=" << slots.size() << " (vehicles " << vehicles << ") ego-ahead-empty=" << ahead_ok
     << " right-row-absent=" << right_ok;
  return {slots.size() == 4 && dropped_ok && ahead_ok && right_ok, os.str()};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) worst = std::max(worst, oracle::relative_error(oracle::random_toy(seed)));
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0, "max rel err=" + fmt("%.3g", worst) + " time=" + fmt("%.1f", secs) + "s"};
}

Outcome dqn_mechanics() {
  const auto t0 = Clock::now();
  const EpsilonSchedule eps;
  const bool eps_ok = eps.at(0) == 1.0 && std::abs(eps.at(250'000) - 0.55) < 1e-12 &&
                      std::abs(eps.at(500'000) - 0.1) < 1e-12 && std::abs(eps.at(2'000'000) - 0.1) < 1e-12;
  const auto dry = dqn_checks::dry_run(120'000);
  const bool first_ok = dry.first_update == 50'000;
  const bool cadence_ok = dry.update_off_cadence == 0 && dry.updates == (120'000 - 50'000) / 4 + 1;
  const bool sync_ok = dry.sync_steps == std::vector<std::int64_t>{50'000, 100'000};
  const auto fifo = dqn_checks::fifo_eviction(500'000, 12'345);
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "eps=" << eps_ok << " first_update=" << dry.first_update << " updates=" << dry.updates << " syncs=";
  for (auto s : dry.sync_steps) os << s << ";";
  os << " fifo=" << fifo.ok << " time=" << fmt("%.1f", secs) << "s";
  return {eps_ok && first_ok && cadence_ok && sync_ok && fifo.ok && secs < 300.0, os.str()};
}

Outcome toy_mdp() {
  const auto r = dqn_checks::toy_mdp_convergence(50'000, 1e-2);
  std::ostringstream os;
  os << "converged_at=" << r.converged_at << " final max|Q-Q*|=" << fmt("%.2e", r.final_error);
  return {r.converged_at > 0 && r.converged_at < 50'000 && r.final_error < 1e-2, os.str()};
}

Outcome reward_priority() {
  const auto r = reward_grid::collision_priority_grid();
  std::ostringstream os;
  os << "evaluations=" << r.evaluations << " collision cases=" << r.collision_cases << " violations=" << r.violations;
  return {r.violations == 0 && r.collision_cases > 0, os.str()};
}

// Desk-scale run shared by criteria 7-9.
struct DeskRun {
  fs::path dir;
  RunConfig cfg;
  NetworkParams params;
  std::vector<MetricsRow> metrics;
  std::optional<EvalResult> eval;
};

nlohmann::json comparable(RunConfig c) {
  c.out_dir.clear();
  return to_json(c);
}

std::vector<MetricsRow> read_metrics(const fs::path& file) {
  std::ifstream is(file);
  std::string line;
  std::getline(is, line);
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    MetricsRow r;
    char c;
    std::istringstream ls(line);
    ls >> r.step >> c >> r.episodes >> c >> r.collision_rate >> c >> r.rule_violation_ratio >> c >> r.mean_reward >> c >>
        r.epsilon;
    if (ls) rows.push_back(r);
  }
  return rows;
}

DeskRun& desk_run(const fs::path& dir) {
  static std::optional<DeskRun> run;
  if (run) return *run;
  run.emplace();
  run->dir = dir;
  run->cfg = desk_scale_config();
  run->cfg.out_dir = dir.string();
  const fs::path cfg_file = dir / "resolved_config.json";
  const fs::path final_ckpt = dir / "checkpoints" / "final";
  bool reuse = false;
  if (fs::exists(cfg_file) && fs::exists(final_ckpt / "manifest.txt")) {
    try {
      reuse = comparable(from_json(read_config_json(cfg_file))) == comparable(run->cfg);
    } catch (const std::exception&) {
      reuse = false;
    }
  }
  if (!reuse) {
    std::cerr << "training desk-scale run into " << dir << " (" << run->cfg.harness.budget << " steps)\n";
    fs::remove_all(dir);
    Trainer trainer(run->cfg);
    trainer.train();
  } else {
    std::cerr << "reusing desk-scale run " << dir << "\n";
  }
  run->params = load_checkpoint(final_ckpt).params;
  run->metrics = read_metrics(dir / "metrics.csv");
  return *run;
}

const EvalResult& desk_eval(DeskRun& run) {
  if (!run.eval) {
    EvalSetting s;
    s.scenario = ScenarioId::kHighway;
    s.runs = run.cfg.eval.runs;
    s.max_steps = run.cfg.eval.max_steps;
    s.seed = run.cfg.eval.seed;
    run.eval = evaluate(run.params, run.cfg, s);
  }
  return *run.eval;
}

Outcome learning_signal(const fs::path& dir) {
  DeskRun& run = desk_run(dir);
  const double budget = static_cast<double>(run.cfg.harness.budget);
  double first = 0.0, last = 0.0;
  int nf = 0, nl = 0;
  for (const auto& m : run.metrics) {
    if (m.step <= 0.1 * budget) first += m.collision_rate, ++nf;
    if (m.step > 0.9 * budget) last += m.collision_rate, ++nl;
  }
  if (nf == 0 || nl == 0) return {false, "metrics.csv lacks first or last windows"};
  first /= nf;
  last /= nl;
  const EvalReport& rep = desk_eval(run).report;
  std::ostringstream os;
  os << "window collision rate first10%=" << fmt("%.2f", first) << "% last10%=" << fmt("%.2f", last)
     << "% ratio=" << fmt("%.1f", last > 0 ? first / last : 1e9) << "x; greedy eval collisions "
     << rep.collisions << "/" << rep.runs << " (" << fmt("%.1f", rep.collision_rate) << "%)";
  return {last * 5.0 <= first && rep.collision_rate < 20.0, os.str()};
}

Outcome behavior_adaptation(const fs::path& dir) {
  DeskRun& run = desk_run(dir);
  EvalSetting s;
  s.scenario = ScenarioId::kHighway;
  s.runs = run.cfg.eval.runs;
  s.max_steps = run.cfg.eval.max_steps;
  s.seed = run.cfg.eval.seed;
  s.empty = true;
  const auto sweep = speed_sweep(run.params, run.cfg, s, {12.0, 17.0, 22.0});
  std::ostringstream os;
  os << "empty-highway avg speed:";
  for (const auto& r : sweep) os << " theta=" << *r.theta_v << "->" << fmt("%.2f", r.avg_speed);
  return {criteria::speed_tracking(sweep, 2, 3.0), os.str()};
}

Outcome keep_right(const fs::path& dir) {
  DeskRun& run = desk_run(dir);
  const auto& shares = desk_eval(run).report.lane_distribution;
  std::ostringstream os;
  os << "lane shares:";
  for (std::size_t i = 0; i < shares.size(); ++i) os << " L" << i << "=" << fmt("%.1f", shares[i]) << "%";
  return {criteria::right_lane_preference(shares), os.str()};
}

Outcome determinism() {
  auto short_run = [](const std::string& name) {
    RunConfig c = desk_scale_config();
    c.harness.budget = 20'000;
    c.harness.metrics_window = 2'000;
    c.harness.checkpoint_every = 10'000;
    c.out_dir = (fs::temp_directory_path() / name).string();
    fs::remove_all(c.out_dir);
    Trainer(c).train();
    return c;
  };
  const RunConfig a = short_run("semdrive_accept_det_a");
  const RunConfig b = short_run("semdrive_accept_det_b");
  const std::string ma = slurp(fs::path(a.out_dir) / "metrics.csv");
  const bool metrics_equal = !ma.empty() && ma == slurp(fs::path(b.out_dir) / "metrics.csv");

  const NetworkParams p = load_checkpoint(fs::path(a.out_dir) / "checkpoints" / "final").params;
  EvalSetting s;
  s.runs = 100;
  const EvalResult res = evaluate(p, a, s);
  TraceHeader h;
  h.setting = s;
  h.num_lanes = scenario_lane_count(a, s.scenario);
  h.input_dim = input_dim(a.encoder);
  h.scope = a.encoder.scope;
  h.sensor_range = a.encoder.sensor_range;
  h.checkpoint = "final";
  const fs::path trace = fs::path(a.out_dir) / "trace.jsonl";
  {
    std::ofstream os(trace);
    write_trace(os, h, res);
  }
  const LoadedTrace loaded = read_trace(trace);
  const EvalReport replayed = compute_report(loaded.runs, loaded.header.setting, loaded.header.num_lanes);
  const bool replay_exact = report_to_json(replayed).dump() == report_to_json(loaded.embedded).dump() &&
                            report_to_json(replayed).dump() == report_to_json(res.report).dump();
  std::ostringstream os;
  os << "metrics byte-identical=" << metrics_equal << " (" << ma.size() << " bytes); replay exact=" << replay_exact
     << " over " << loaded.runs.size() << " runs";
  return {metrics_equal && replay_exact, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path desk_dir = std::getenv("SEMDRIVE_DESK_RUN") ? std::getenv("SEMDRIVE_DESK_RUN") : "acceptance_desk_run";
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--desk-run" && i + 1 < argc) {
      desk_dir = argv[++i];
    } else {
      wanted.insert(std::atoi(a.c_str()));
    }
  }

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> all = {
      {1, {"encoder suite", encoder_suite}},
      {2, {"two-lane constellation", constellation}},
      {3, {"gradient oracle", gradient_check}},
      {4, {"dqn mechanics", dqn_mechanics}},
      {5, {"toy MDP convergence", toy_mdp}},
      {6, {"reward priority", reward_priority}},
      {7, {"desk-scale learning signal", [&] { return learning_signal(desk_dir); }}},
      {8, {"behavior adaptation", [&] { return behavior_adaptation(desk_dir); }}},
      {9, {"keep-right tendency", [&] { return keep_right(desk_dir); }}},
      {10, {"end-to-end determinism", determinism}},
  };

  int failed = 0;
  for (const auto& [id, entry] : all) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << id << " [" << entry.first << "]: " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
              << " (" << fmt("%.1f", seconds_since(t0)) << "s)" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
