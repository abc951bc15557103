#include "semdrive/semantic_state.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semdrive {

void validate(const EncoderConfig& cfg) {
  const auto& s = cfg.scope;
  if (s.lateral < 0 || s.ahead < 1 || s.behind < 0) {
    throw std::invalid_argument("encoder scope needs lateral >= 0, ahead >= 1, behind >= 0");
  }
  if (!(cfg.sensor_range > 0)) throw std::invalid_argument("encoder.sensor_range must be positive");
  const auto& n = cfg.norm;
  if (!(n.v_max > 0 && n.half_lane_width > 0 && n.heading_scale > 0 && n.lane_end_cap > 0 &&
        n.lane_index_scale > 0)) {
    throw std::invalid_argument("encoder normalization constants must be positive");
  }
  if (std::abs(n.sentinel) <= 1.0) {
    throw std::invalid_argument("encoder sentinel must lie outside [-1, 1]");
  }
}

const VehicleEntity* ErModel::vehicle(int id) const {
  for (const auto& v : vehicles) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

const VehicleVehicleRelation* ErModel::relation_to(int id) const {
  for (const auto& r : vehicle_vehicle) {
    if (r.other_id == id) return &r;
  }
  return nullptr;
}

const VehicleLaneRelation* ErModel::lane_relation(int vehicle_id) const {
  for (const auto& r : vehicle_lane) {
    if (r.vehicle_id == vehicle_id) return &r;
  }
  return nullptr;
}

const LaneEntity* ErModel::lane_by_index(int index) const {
  for (const auto& l : lanes) {
    if (l.index == index) return &l;
  }
  return nullptr;
}

ErModel build_er_model(const TrafficScene& scene, double sensor_range) {
  ErModel er;
  const Vehicle& ego = scene.ego();
  auto entity = [](const Vehicle& v) {
    return VehicleEntity{v.id, v.lane, v.s, v.v, v.d, v.phi, v.length, v.is_ego};
  };
  er.vehicles.push_back(entity(ego));
  std::vector<VehicleEntity> others;
  for (const auto& v : scene.vehicles) {
    if (v.is_ego || std::abs(v.s - ego.s) > sensor_range) continue;
    others.push_back(entity(v));
  }
  std::sort(others.begin(), others.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  er.vehicles.insert(er.vehicles.end(), others.begin(), others.end());

  for (const auto& l : scene.lanes) {
    if (l.contains(ego.s)) {
      er.lanes.push_back({l.id, l.index, l.type, l.start_s, l.end_s, l.terminates});
    }
  }
  std::sort(er.lanes.begin(), er.lanes.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });

  for (const auto& l : er.lanes) {
    LaneLaneRelation rel{l.id, -1, -1};
    if (const auto* left = er.lane_by_index(l.index + 1)) rel.left_id = left->id;
    if (const auto* right = er.lane_by_index(l.index - 1)) rel.right_id = right->id;
    er.lane_lane.push_back(rel);
  }

  for (const auto& v : er.vehicles) {
    if (!v.is_ego) er.vehicle_vehicle.push_back({ego.id, v.id, v.s - ego.s, v.v - ego.v});
    const LaneSegment* lane = scene.lane_at(v.lane, v.s);
    if (lane != nullptr) {
      // Lanes are straight, so lane-local offset and heading are the relation values.
      er.vehicle_lane.push_back({v.id, lane->id, v.d, v.phi});
    }
  }
  return er;
}

std::vector<ScopeSlot> select_scope(const ErModel& er, const VehicleScope& scope) {
  const VehicleEntity& ego = er.ego();
  std::vector<ScopeSlot> out;

  struct Candidate {
    double ds;
    int id;
    double half_length;
  };

  for (int offset = scope.lateral; offset >= -scope.lateral; --offset) {
    const int lane = ego.lane + offset;
    const int row = scope.lateral - offset;
    std::vector<Candidate> cands;
    for (const auto& v : er.vehicles) {
      if (v.is_ego || v.lane != lane) continue;
      cands.push_back({v.s - ego.s, v.id, 0.5 * v.length});
    }
    if (cands.empty()) continue;

    if (offset != 0) {
      // Vehicle alongside: body overlaps the ego's longitudinal extent.
      auto alongside = cands.end();
      for (auto it = cands.begin(); it != cands.end(); ++it) {
        if (std::abs(it->ds) >= it->half_length + 0.5 * ego.length) continue;
        if (alongside == cands.end() || std::abs(it->ds) < std::abs(alongside->ds) ||
            (std::abs(it->ds) == std::abs(alongside->ds) && it->id < alongside->id)) {
          alongside = it;
        }
      }
      if (alongside != cands.end()) {
        out.push_back({alongside->id, row, scope.ego_col()});
        cands.erase(alongside);
      }
    }

    std::vector<Candidate> ahead;
    std::vector<Candidate> behind;
    for (const auto& c : cands) (c.ds > 0 ? ahead : behind).push_back(c);
    std::sort(ahead.begin(), ahead.end(), [](const auto& a, const auto& b) {
      return a.ds < b.ds || (a.ds == b.ds && a.id < b.id);
    });
    std::sort(behind.begin(), behind.end(), [](const auto& a, const auto& b) {
      return a.ds > b.ds || (a.ds == b.ds && a.id < b.id);
    });
    for (int r = 0; r < scope.ahead && r < static_cast<int>(ahead.size()); ++r) {
      out.push_back({ahead[r].id, row, scope.ego_col() + 1 + r});
    }
    for (int r = 0; r < scope.behind && r < static_cast<int>(behind.size()); ++r) {
      out.push_back({behind[r].id, row, scope.ego_col() - 1 - r});
    }
  }
  return out;
}

double behavior_adaptation(double theta_v, double ego_speed) { return theta_v - ego_speed; }

double behavior_adaptation(const TrafficScene& scene, double theta_v) {
  return behavior_adaptation(theta_v, scene.ego().v);
}

StateTensor::StateTensor(int rows, int cols, float fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols * kNumLayers, fill) {}

float& StateTensor::at(int row, int col, Layer layer) {
  return data_[flat_index(cols_, row, col, layer)];
}

float StateTensor::at(int row, int col, Layer layer) const {
  return data_[flat_index(cols_, row, col, layer)];
}

namespace {

float scaled(double value, double scale) {
  return static_cast<float>(std::clamp(value / scale, -1.0, 1.0));
}

}  // namespace

StateTensor encode(const ErModel& er, std::span<const ScopeSlot> selected,
                   const EncoderConfig& cfg, double theta_v) {
  const auto& scope = cfg.scope;
  const auto& n = cfg.norm;
  const auto sentinel = static_cast<float>(n.sentinel);
  StateTensor t(scope.rows(), scope.cols(), sentinel);
  const VehicleEntity& ego = er.ego();

  for (int row = 0; row < scope.rows(); ++row) {
    for (int col = 0; col < scope.cols(); ++col) t.at(row, col, Layer::kMask) = 0.0f;
    const LaneEntity* lane = er.lane_by_index(ego.lane + scope.lateral - row);
    if (lane == nullptr) continue;  // nonexistent lane: lane layers keep the sentinel
    const float type =
        lane->type == LaneType::kAcceleration ? kLaneTypeAcceleration : kLaneTypeNormal;
    const double to_end =
        lane->terminates ? std::clamp(lane->end_s - ego.s, 0.0, n.lane_end_cap) : n.lane_end_cap;
    const float end = static_cast<float>(to_end / n.lane_end_cap);
    for (int col = 0; col < scope.cols(); ++col) {
      t.at(row, col, Layer::kLaneType) = type;
      t.at(row, col, Layer::kLaneEnd) = end;
    }
  }

  const int er_row = scope.ego_row();
  const int ec = scope.ego_col();
  t.at(er_row, ec, Layer::kDs) = scaled(behavior_adaptation(theta_v, ego.v), n.v_max);
  t.at(er_row, ec, Layer::kDv) = scaled(ego.v, n.v_max);
  t.at(er_row, ec, Layer::kDd) = scaled(ego.lane, n.lane_index_scale);
  t.at(er_row, ec, Layer::kDphi) = 0.0f;
  t.at(er_row, ec, Layer::kMask) = 1.0f;

  for (const auto& slot : selected) {
    const auto* vv = er.relation_to(slot.vehicle_id);
    if (vv == nullptr) throw std::invalid_argument("selected vehicle not in ER model");
    const auto* vl = er.lane_relation(slot.vehicle_id);
    const double dd = vl ? vl->dd : 0.0;
    const double dphi = vl ? vl->dphi : 0.0;
    t.at(slot.row, slot.col, Layer::kDs) = scaled(vv->ds, cfg.sensor_range);
    t.at(slot.row, slot.col, Layer::kDv) = scaled(vv->dv, n.v_max);
    t.at(slot.row, slot.col, Layer::kDd) = scaled(dd, n.half_lane_width);
    t.at(slot.row, slot.col, Layer::kDphi) = scaled(dphi, n.heading_scale);
    t.at(slot.row, slot.col, Layer::kMask) = 1.0f;
  }
  return t;
}

std::vector<float> flatten(const StateTensor& tensor) {
  return {tensor.data().begin(), tensor.data().end()};
}

std::vector<float> encode_scene(const TrafficScene& scene, const EncoderConfig& cfg,
                                double theta_v) {
  const ErModel er = build_er_model(scene, cfg.sensor_range);
  const auto selected = select_scope(er, cfg.scope);
  return flatten(encode(er, selected, cfg, theta_v));
}

}  // namespace semdrive
