#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semdrive/config.hpp"
#include "semdrive/mlp.hpp"
#include "semdrive/sim.hpp"

namespace semdrive {

class InputDimMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-step ego record kept by evaluation runs.
struct TraceStep {
  int lane = 0;
  double s = 0.0;
  double v = 0.0;
  double distance = 0.0;  // ego travel during this step [m]
  Action action = Action::kDefault;
  bool violation = false;  // safe distance or passing on the right
  bool collision = false;
};

struct RunTrace {
  int run = 0;
  double theta_v = 0.0;
  std::vector<TraceStep> steps;
  bool collided = false;
  bool course_end = false;
};

struct EvalSetting {
  ScenarioId scenario = ScenarioId::kHighway;
  int runs = 100;
  int max_steps = 1000;
  std::uint64_t seed = 7'000'000;
  std::optional<double> theta_v;  // fixed desired speed; drawn per run otherwise
  bool empty = false;             // no background traffic
};

struct EvalReport {
  ScenarioId scenario = ScenarioId::kHighway;
  int runs = 0;
  std::optional<double> theta_v;
  bool empty = false;
  int collisions = 0;
  double collision_rate = 0.0;  // percent of runs
  double total_distance_km = 0.0;
  /// Total distance divided by collisions; with no collision it holds the
  /// total distance and `no_collision` is set.
  double avg_distance_between_collisions_km = 0.0;
  bool no_collision = false;
  std::int64_t timesteps = 0;
  double rule_violation_ratio = 0.0;    // percent of pooled timesteps
  std::vector<double> lane_distribution;  // percent per lane index
  double avg_speed = 0.0;               // m/s over pooled timesteps
};

/// Percent of timesteps per lane index 0..num_lanes-1. Throws on an empty trace.
std::vector<double> lane_distribution(const std::vector<RunTrace>& runs, int num_lanes);

/// Aggregates traces into a report. Pure; replay relies on that.
EvalReport compute_report(const std::vector<RunTrace>& runs, const EvalSetting& setting, int num_lanes);

/// One greedy run from a randomized start until collision, course end or
/// max_steps.
RunTrace run_greedy(const NetworkParams& params, const RunConfig& cfg, const EvalSetting& setting,
                    int run_index);

struct EvalResult {
  EvalReport report;
  std::vector<RunTrace> runs;
};

/// Greedy evaluation over setting.runs seeded runs.
EvalResult evaluate(const NetworkParams& params, const RunConfig& cfg, const EvalSetting& setting);

/// Average speed for each desired speed; one evaluate() per value.
std::vector<EvalReport> speed_sweep(const NetworkParams& params, const RunConfig& cfg,
                                    EvalSetting setting, const std::vector<double>& theta_values);

int scenario_lane_count(const RunConfig& cfg, ScenarioId id);

nlohmann::json report_to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);
std::string report_csv_header(int num_lanes);
std::string report_csv_row(const EvalReport& r);

/// Speed matrix: one row per desired speed, one column per sweep.
std::string sweep_csv(const std::vector<std::string>& column_names,
                      const std::vector<std::vector<EvalReport>>& columns);

struct TraceHeader {
  EvalSetting setting;
  int num_lanes = 3;
  int input_dim = 0;
  VehicleScope scope;
  double sensor_range = 0.0;
  std::string checkpoint;
};

/// JSON-lines trace: header, step and run_end records per run, final report.
void write_trace(std::ostream& os, const TraceHeader& header, const EvalResult& result);

struct LoadedTrace {
  TraceHeader header;
  std::vector<RunTrace> runs;
  EvalReport embedded;
};

/// Parses a trace. Throws TraceError on malformed, truncated or
/// inconsistent content.
LoadedTrace read_trace(std::istream& is);
LoadedTrace read_trace(const std::filesystem::path& file);

}  // namespace semdrive
