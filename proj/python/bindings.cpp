#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "semdrive/agent.hpp"
#include "semdrive/checkpoint.hpp"
#include "semdrive/config.hpp"
#include "semdrive/eval.hpp"
#include "semdrive/harness.hpp"
#include "semdrive/mlp.hpp"
#include "semdrive/reward.hpp"
#include "semdrive/semantic_state.hpp"
#include "semdrive/sim.hpp"

namespace py = pybind11;
using namespace semdrive;

namespace {

// Configs cross the boundary as JSON text; the Python side wraps them in dicts.
RunConfig parse_config(const std::string& text) {
  return text.empty() ? RunConfig{} : from_json(nlohmann::json::parse(text));
}

py::dict vehicle_dict(const Vehicle& v) {
  py::dict d;
  d["id"] = v.id;
  d["lane"] = v.lane;
  d["s"] = v.s;
  d["v"] = v.v;
  d["d"] = v.d;
  d["phi"] = v.phi;
  d["length"] = v.length;
  d["is_ego"] = v.is_ego;
  return d;
}

py::dict flags_dict(const RuleFlags& f) {
  py::dict d;
  d["pass_right"] = f.pass_right;
  d["not_enter"] = f.not_enter;
  d["safe_distance"] = f.safe_distance;
  d["keep_right"] = f.keep_right;
  return d;
}

py::array_t<float> to_array(const std::vector<float>& v) {
  py::array_t<float> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

class PyScene {
 public:
  PyScene(const std::string& scenario, std::uint64_t seed, const std::string& config)
      : cfg_(parse_config(config)),
        scene_(build_scenario(cfg_.scenario(scenario_from_string(scenario)), cfg_.sim, seed)) {}

  py::dict step(int action) {
    const Action a = action_from_index(action);
    const StepEvents ev = semdrive::step(scene_, a);
    py::list kinds;
    for (const auto& c : ev.collisions) kinds.append(std::string(to_string(c.kind)));
    py::dict d;
    d["collided"] = ev.collided();
    d["collisions"] = kinds;
    d["spawned"] = ev.spawned;
    d["despawned"] = ev.despawned;
    return d;
  }

  void place_ego(int lane, double s, double v) { semdrive::place_ego(scene_, lane, s, v); }

  py::array_t<float> encode(double theta_v) const { return to_array(encode_scene(scene_, cfg_.encoder, theta_v)); }

  py::dict rules() const { return flags_dict(check_rules(scene_, cfg_.reward)); }

  py::dict reward(int action, double theta_v, bool collided) const {
    const RuleFlags flags = check_rules(scene_, cfg_.reward);
    RewardParams p = cfg_.reward_weights;
    p.desired_speed = theta_v;
    const RewardBreakdown r =
        compute_reward(classify(collided, flags), flags, scene_, action_from_index(action), p, cfg_.reward);
    py::dict d;
    d["class"] = std::string(to_string(r.state_class));
    d["total"] = r.total;
    d["velocity"] = r.velocity;
    d["action"] = r.action;
    return d;
  }

  py::dict ego() const { return vehicle_dict(scene_.ego()); }

  py::list vehicles() const {
    py::list out;
    for (const auto& v : scene_.vehicles) out.append(vehicle_dict(v));
    return out;
  }

  std::int64_t time_step() const { return scene_.time_step; }
  int num_lanes() const { return scene_.max_lane_index() + 1; }
  bool past_course_end() const { return scene_.ego_past_course_end(); }

 private:
  RunConfig cfg_;
  TrafficScene scene_;
};

std::string eval_checkpoint(const std::string& checkpoint, const std::string& config, const std::string& scenario,
                            int runs, std::optional<double> theta_v, bool empty, std::uint64_t seed) {
  const RunConfig cfg = parse_config(config);
  EvalSetting s;
  s.scenario = scenario_from_string(scenario);
  s.runs = runs;
  s.max_steps = cfg.eval.max_steps;
  s.seed = seed;
  s.theta_v = theta_v;
  s.empty = empty;
  const NetworkParams p = load_checkpoint(checkpoint).params;
  return report_to_json(evaluate(p, cfg, s).report).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Traffic simulator, semantic state encoder and DQN driving agent";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);
  py::register_exception<InputDimMismatch>(m, "InputDimMismatch", PyExc_ValueError);

  m.attr("NUM_ACTIONS") = kNumActions;
  m.def("action_names", [] {
    std::vector<std::string> names;
    for (int i = 0; i < kNumActions; ++i) names.emplace_back(to_string(action_from_index(i)));
    return names;
  });

  m.def("default_config_json", [] { return to_json(RunConfig{}).dump(); });
  m.def("desk_config_json", [] { return to_json(desk_scale_config()).dump(); });
  m.def("validate_config_json", [](const std::string& text) { return to_json(parse_config(text)).dump(); });
  m.def("input_dim", [](const std::string& config) { return input_dim(parse_config(config).encoder); },
        py::arg("config") = "");

  m.def("epsilon", [](std::int64_t step, const std::string& config) { return parse_config(config).agent.epsilon.at(step); },
        py::arg("step"), py::arg("config") = "");

  m.def("velocity_reward", [](double omega) { return velocity_reward(omega, RewardShape{}); });

  py::class_<PyScene>(m, "Scene")
      .def(py::init<const std::string&, std::uint64_t, const std::string&>(), py::arg("scenario") = "highway",
           py::arg("seed") = 0, py::arg("config") = "")
      .def("step", &PyScene::step, py::arg("action"))
      .def("place_ego", &PyScene::place_ego, py::arg("lane"), py::arg("s"), py::arg("v"))
      .def("encode", &PyScene::encode, py::arg("theta_v"))
      .def("rules", &PyScene::rules)
      .def("reward", &PyScene::reward, py::arg("action"), py::arg("theta_v"), py::arg("collided") = false)
      .def_property_readonly("ego", &PyScene::ego)
      .def_property_readonly("vehicles", &PyScene::vehicles)
      .def_property_readonly("time_step", &PyScene::time_step)
      .def_property_readonly("num_lanes", &PyScene::num_lanes)
      .def_property_readonly("past_course_end", &PyScene::past_course_end);

  m.def("q_values",
        [](const std::string& checkpoint, py::array_t<float, py::array::c_style | py::array::forcecast> state) {
          const NetworkParams p = load_checkpoint(checkpoint).params;
          const std::vector<double> x(state.data(), state.data() + state.size());
          const Eigen::VectorXd q = forward(p, x);
          return std::vector<double>(q.data(), q.data() + q.size());
        },
        py::arg("checkpoint"), py::arg("state"));

  m.def("train",
        [](const std::string& config) {
          const RunConfig cfg = parse_config(config);
          Trainer trainer(cfg);
          {
            py::gil_scoped_release release;
            trainer.train();
          }
          py::list rows;
          for (const auto& r : trainer.metrics()) {
            py::dict d;
            d["step"] = r.step;
            d["episodes"] = r.episodes;
            d["collision_rate"] = r.collision_rate;
            d["rule_violation_ratio"] = r.rule_violation_ratio;
            d["mean_reward"] = r.mean_reward;
            d["epsilon"] = r.epsilon;
            rows.append(d);
          }
          return rows;
        },
        py::arg("config"));

  m.def("evaluate_json", &eval_checkpoint, py::arg("checkpoint"), py::arg("config") = "",
        py::arg("scenario") = "highway", py::arg("runs") = 100, py::arg("theta_v") = py::none(),
        py::arg("empty") = false, py::arg("seed") = 7'000'000, py::call_guard<py::gil_scoped_release>());
}
