#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semdrive/checkpoint.hpp"
#include "semdrive/config.hpp"
#include "semdrive/eval.hpp"
#include "semdrive/harness.hpp"
#include "semdrive/semantic_state.hpp"

namespace fs = std::filesystem;
using namespace semdrive;

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kRuntime = 2, kIntegrity = 3 };

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON run configuration");
  cmd->add_option("--set", o.overrides, "key=value override (repeatable)");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
}

// Config from --config, else the resolved config stored next to a
// checkpoint, else built-in defaults.
RunConfig resolve_config(const CommonOptions& o, const fs::path& checkpoint = {}) {
  fs::path path = o.config;
  if (path.empty() && !checkpoint.empty()) {
    const fs::path beside = checkpoint.parent_path().parent_path() / "resolved_config.json";
    if (fs::exists(beside)) path = beside;
  }
  RunConfig cfg;
  if (!path.empty()) {
    cfg = load_run_config(path, o.overrides);
  } else {
    nlohmann::json j = to_json(cfg);
    for (const auto& a : o.overrides) apply_override(j, a);
    cfg = from_json(j);
  }
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  validate(cfg);
  return cfg;
}

NetworkParams load_params_for(const fs::path& checkpoint, const RunConfig& cfg) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const auto expected = static_cast<int>(input_dim(cfg.encoder));
  if (ck.params.input_dim() != expected) {
    throw InputDimMismatch("checkpoint " + checkpoint.string() + " has input_dim " +
                           std::to_string(ck.params.input_dim()) + " but the encoder config produces " +
                           std::to_string(expected));
  }
  return std::move(ck.params);
}

void warn_theta_range(const RunConfig& cfg, ScenarioId id, double theta) {
  const ScenarioConfig& sc = cfg.scenario(id);
  if (theta < sc.theta_v_min || theta > sc.theta_v_max) {
    std::fprintf(stderr, "warning: theta_v %.2f m/s is outside the %s training range [%.1f, %.1f]\n", theta,
                 std::string(to_string(id)).c_str(), sc.theta_v_min, sc.theta_v_max);
  }
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  os << text;
}

void print_report(const EvalReport& r) {
  std::printf("scenario              %s%s\n", std::string(to_string(r.scenario)).c_str(), r.empty ? " (empty)" : "");
  if (r.theta_v) std::printf("theta_v               %.2f m/s\n", *r.theta_v);
  else std::printf("theta_v               random per run\n");
  std::printf("runs                  %d\n", r.runs);
  std::printf("collision rate        %.2f %% (%d)\n", r.collision_rate, r.collisions);
  std::printf("avg distance          %.3f km%s\n", r.avg_distance_between_collisions_km,
              r.no_collision ? " (no collision; total distance)" : "");
  std::printf("rule violations       %.2f %% of %lld steps\n", r.rule_violation_ratio,
              static_cast<long long>(r.timesteps));
  std::printf("lane distribution    ");
  for (std::size_t i = 0; i < r.lane_distribution.size(); ++i) {
    std::printf(" L%zu %.1f%%", i, r.lane_distribution[i]);
  }
  std::printf("\navg speed             %.2f m/s\n", r.avg_speed);
}

int cmd_train(const CommonOptions& o, const std::string& resume) {
  RunConfig cfg = resolve_config(o);
  Trainer trainer(cfg);
  if (!resume.empty()) trainer.load_resume(resume);
  std::fprintf(stderr, "training %lld steps into %s\n", static_cast<long long>(cfg.harness.budget),
               cfg.out_dir.c_str());
  trainer.train();
  std::fprintf(stderr, "done: %lld steps, %lld episodes, %lld updates\n",
               static_cast<long long>(trainer.global_step()), static_cast<long long>(trainer.episodes()),
               static_cast<long long>(trainer.agent().updates()));
  return kOk;
}

struct EvalOptions {
  std::string checkpoint;
  std::string scenario = "highway";
  std::optional<int> runs;
  std::vector<double> theta_v;
  bool empty = false;
  bool no_trace = false;
};

EvalSetting make_setting(const RunConfig& cfg, const EvalOptions& e, std::optional<std::uint64_t> seed) {
  EvalSetting s;
  s.scenario = scenario_from_string(e.scenario);
  s.runs = e.runs.value_or(cfg.eval.runs);
  s.max_steps = cfg.eval.max_steps;
  s.seed = seed.value_or(cfg.eval.seed);
  s.empty = e.empty;
  return s;
}

int cmd_eval(const CommonOptions& o, const EvalOptions& e) {
  const RunConfig cfg = resolve_config(o, e.checkpoint);
  const NetworkParams params = load_params_for(e.checkpoint, cfg);
  EvalSetting setting = make_setting(cfg, e, o.seed);
  if (e.theta_v.size() > 1) throw std::invalid_argument("eval takes one --theta-v; use sweep for several");
  if (!e.theta_v.empty()) {
    setting.theta_v = e.theta_v.front();
    warn_theta_range(cfg, setting.scenario, *setting.theta_v);
  }
  const EvalResult result = evaluate(params, cfg, setting);
  print_report(result.report);

  const fs::path out = o.out_dir.empty() ? fs::path(e.checkpoint).parent_path().parent_path() / "eval" : fs::path(o.out_dir);
  fs::create_directories(out);
  const int lanes = scenario_lane_count(cfg, setting.scenario);
  write_text(out / "report.json", report_to_json(result.report).dump(2) + "\n");
  write_text(out / "report.csv", report_csv_header(lanes) + "\n" + report_csv_row(result.report) + "\n");
  if (!e.no_trace) {
    TraceHeader h;
    h.setting = setting;
    h.num_lanes = lanes;
    h.input_dim = static_cast<int>(input_dim(cfg.encoder));
    h.scope = cfg.encoder.scope;
    h.sensor_range = cfg.encoder.sensor_range;
    h.checkpoint = e.checkpoint;
    std::ofstream os(out / "trace.jsonl");
    if (!os) throw std::runtime_error("cannot write trace in " + out.string());
    write_trace(os, h, result);
  }
  std::fprintf(stderr, "wrote %s\n", out.string().c_str());
  return kOk;
}

int cmd_sweep(const CommonOptions& o, EvalOptions e) {
  const RunConfig cfg = resolve_config(o, e.checkpoint);
  const NetworkParams params = load_params_for(e.checkpoint, cfg);
  if (e.theta_v.empty()) e.theta_v = {12, 17, 22, 27, 30};
  EvalSetting setting = make_setting(cfg, e, o.seed);
  for (double t : e.theta_v) warn_theta_range(cfg, setting.scenario, t);

  std::vector<std::string> names;
  std::vector<std::vector<EvalReport>> columns;
  const std::vector<bool> modes = e.empty ? std::vector<bool>{true} : std::vector<bool>{false, true};
  for (bool empty : modes) {
    setting.empty = empty;
    names.push_back(e.scenario + (empty ? "_empty" : "_traffic"));
    columns.push_back(speed_sweep(params, cfg, setting, e.theta_v));
  }
  const std::string table = sweep_csv(names, columns);
  std::fputs(table.c_str(), stdout);
  if (!o.out_dir.empty()) {
    fs::create_directories(o.out_dir);
    write_text(fs::path(o.out_dir) / "speed_sweep.csv", table);
  }
  return kOk;
}

bool same_report(const EvalReport& a, const EvalReport& b) {
  return report_to_json(a) == report_to_json(b);
}

int cmd_replay(const CommonOptions& o, const std::string& trace_path, bool table) {
  const LoadedTrace trace = read_trace(trace_path);
  if (!o.config.empty()) {
    const RunConfig cfg = resolve_config(o);
    const auto& s = cfg.encoder.scope;
    const auto& hs = trace.header.scope;
    if (s.lateral != hs.lateral || s.ahead != hs.ahead || s.behind != hs.behind ||
        cfg.encoder.sensor_range != trace.header.sensor_range ||
        static_cast<int>(input_dim(cfg.encoder)) != trace.header.input_dim) {
      std::fprintf(stderr, "warning: trace was produced with a different encoder config\n");
    }
  }
  if (table) {
    std::printf("%4s %4s %5s %9s %7s %-18s %3s %3s\n", "run", "t", "lane", "s", "v", "action", "vio", "col");
    for (const auto& run : trace.runs) {
      for (std::size_t t = 0; t < run.steps.size(); ++t) {
        const auto& st = run.steps[t];
        std::printf("%4d %4zu %5d %9.2f %7.2f %-18s %3d %3d\n", run.run, t, st.lane, st.s, st.v,
                    std::string(to_string(st.action)).c_str(), st.violation ? 1 : 0, st.collision ? 1 : 0);
      }
    }
  }
  const EvalReport recomputed = compute_report(trace.runs, trace.header.setting, trace.header.num_lanes);
  print_report(recomputed);
  if (!same_report(recomputed, trace.embedded)) {
    std::fprintf(stderr, "integrity error: recomputed metrics differ from the embedded report\n");
    return kIntegrity;
  }
  std::printf("metrics match\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semdrive: semantic-state DQN driving agent"};
  app.require_subcommand(1);

  CommonOptions train_o, eval_o, sweep_o, replay_o;
  EvalOptions eval_e, sweep_e;
  std::string resume, trace_path;
  bool no_table = false;

  auto* train = app.add_subcommand("train", "train an agent");
  add_common(train, train_o);
  train->add_option("--resume", resume, "resume snapshot written with harness.save_resume_state");

  auto add_eval_flags = [](CLI::App* cmd, EvalOptions& e) {
    cmd->add_option("--checkpoint", e.checkpoint, "checkpoint directory")->required();
    cmd->add_option("--scenario", e.scenario, "highway or merging")->check(CLI::IsMember({"highway", "merging"}));
    cmd->add_option("--runs", e.runs, "number of runs")->check(CLI::PositiveNumber);
    cmd->add_option("--theta-v", e.theta_v, "desired speed(s) [m/s]")->delimiter(',');
    cmd->add_flag("--empty", e.empty, "no background traffic");
  };
  auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  add_common(eval, eval_o);
  add_eval_flags(eval, eval_e);
  eval->add_flag("--no-trace", eval_e.no_trace, "skip the JSON-lines trace");

  auto* sweep = app.add_subcommand("sweep", "average speed over a list of desired speeds");
  add_common(sweep, sweep_o);
  add_eval_flags(sweep, sweep_e);

  auto* replay = app.add_subcommand("replay", "recompute and verify the report of a trace");
  replay->add_option("trace", trace_path, "trace.jsonl")->required();
  replay->add_option("--config", replay_o.config, "config to compare the encoder against");
  replay->add_flag("--no-table", no_table, "skip the per-step table");

  auto* defaults = app.add_subcommand("print-defaults", "list every default and its origin");
  auto* dump = app.add_subcommand("dump-config", "write the resolved config as JSON");
  CommonOptions dump_o;
  bool desk = false;
  add_common(dump, dump_o);
  dump->add_flag("--desk", desk, "start from the desk-scale highway preset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidation;
  }

  try {
    if (*train) return cmd_train(train_o, resume);
    if (*eval) return cmd_eval(eval_o, eval_e);
    if (*sweep) return cmd_sweep(sweep_o, sweep_e);
    if (*replay) return cmd_replay(replay_o, trace_path, !no_table);
    if (*defaults) {
      std::fputs(describe_defaults().c_str(), stdout);
      return kOk;
    }
    if (*dump) {
      nlohmann::json j = to_json(desk ? desk_scale_config() : RunConfig{});
      for (const auto& a : dump_o.overrides) apply_override(j, a);
      RunConfig cfg = from_json(j);
      if (dump_o.seed) cfg.seed = *dump_o.seed;
      if (!dump_o.out_dir.empty()) cfg.out_dir = dump_o.out_dir;
      validate(cfg);
      std::printf("%s\n", to_json(cfg).dump(2).c_str());
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kValidation;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kValidation;
  } catch (const InputDimMismatch& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidation;
  } catch (const TraceError& e) {
    std::fprintf(stderr, "integrity error: %s\n", e.what());
    return kIntegrity;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return kIntegrity;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kOk;
}
