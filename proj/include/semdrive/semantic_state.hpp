#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "semdrive/sim.hpp"

namespace semdrive {

/// Bounds of the relational grid around the ego.
struct VehicleScope {
  int lateral = 2;
  int ahead = 2;
  int behind = 1;

  int rows() const { return 2 * lateral + 1; }
  int cols() const { return behind + 1 + ahead; }
  int ego_row() const { return lateral; }
  int ego_col() const { return behind; }
};

struct NormalizationConfig {
  double v_max = 40.0;         // speeds, speed differences and the ego Omega
  double half_lane_width = 1.75;
  double heading_scale = 0.7853981633974483;  // pi/4
  double lane_end_cap = 500.0;
  double lane_index_scale = 4.0;
  double sentinel = -2.0;
};

struct EncoderConfig {
  VehicleScope scope;
  double sensor_range = 100.0;
  NormalizationConfig norm;
};

/// Throws std::invalid_argument for a scope or scaling that cannot encode.
void validate(const EncoderConfig& cfg);

// --- entity-relationship view ------------------------------------------

struct VehicleEntity {
  int id = 0;
  int lane = 0;
  double s = 0.0;
  double v = 0.0;
  double d = 0.0;
  double phi = 0.0;
  double length = 0.0;
  bool is_ego = false;
};

struct LaneEntity {
  int id = 0;
  int index = 0;
  LaneType type = LaneType::kNormal;
  double start_s = 0.0;
  double end_s = 0.0;
  bool terminates = false;
};

/// Relative longitudinal position and speed of a vehicle w.r.t. the ego.
struct VehicleVehicleRelation {
  int ego_id = 0;
  int other_id = 0;
  double ds = 0.0;
  double dv = 0.0;
};

/// Occupancy of a lane with alignment and heading relative to it.
struct VehicleLaneRelation {
  int vehicle_id = 0;
  int lane_id = 0;
  double dd = 0.0;
  double dphi = 0.0;
};

struct LaneLaneRelation {
  int lane_id = 0;
  int left_id = -1;
  int right_id = -1;
};

struct ErModel {
  std::vector<VehicleEntity> vehicles;  // ego first, then by id
  std::vector<LaneEntity> lanes;        // cross-section at the ego position
  std::vector<VehicleVehicleRelation> vehicle_vehicle;
  std::vector<VehicleLaneRelation> vehicle_lane;
  std::vector<LaneLaneRelation> lane_lane;

  const VehicleEntity& ego() const { return vehicles.front(); }
  const VehicleEntity* vehicle(int id) const;
  const VehicleVehicleRelation* relation_to(int id) const;
  const VehicleLaneRelation* lane_relation(int vehicle_id) const;
  const LaneEntity* lane_by_index(int index) const;
};

/// Vehicles within `sensor_range` (inclusive) of the ego and the lane
/// segments crossing the ego position.
ErModel build_er_model(const TrafficScene& scene, double sensor_range);

/// A selected vehicle and its grid cell.
struct ScopeSlot {
  int vehicle_id = 0;
  int row = 0;
  int col = 0;
};

/// Vehicles kept by the scope. On the ego lane: nearest `ahead` vehicles
/// with ds > 0 and nearest `behind` with ds <= 0. On other rows the
/// center column holds the vehicle whose body overlaps the ego's longitudinal
/// extent (if any); the rest fill ahead/behind as on the ego lane.
std::vector<ScopeSlot> select_scope(const ErModel& er, const VehicleScope& scope);

/// Omega: desired minus actual ego speed.
double behavior_adaptation(double theta_v, double ego_speed);
double behavior_adaptation(const TrafficScene& scene, double theta_v);

enum class Layer : int {
  kDs = 0,       // ego cell: Omega
  kDv = 1,       // ego cell: ego speed
  kDd = 2,       // ego cell: lane index k
  kDphi = 3,     // ego cell: 0
  kLaneType = 4,
  kLaneEnd = 5,
  kMask = 6,
};
inline constexpr int kNumLayers = 7;

inline constexpr float kLaneTypeNormal = 0.0f;
inline constexpr float kLaneTypeAcceleration = 1.0f;

class StateTensor {
 public:
  StateTensor(int rows, int cols, float fill);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int layers() const { return kNumLayers; }
  std::size_t size() const { return data_.size(); }

  float& at(int row, int col, Layer layer);
  float at(int row, int col, Layer layer) const;

  /// Row-major over cells, layers innermost:
  /// index = (row * cols + col) * layers + layer.
  static std::size_t flat_index(int cols, int row, int col, Layer layer) {
    return (static_cast<std::size_t>(row) * cols + col) * kNumLayers +
           static_cast<std::size_t>(layer);
  }

  std::span<const float> data() const { return data_; }

 private:
  int rows_;
  int cols_;
  std::vector<float> data_;
};

StateTensor encode(const ErModel& er, std::span<const ScopeSlot> selected,
                   const EncoderConfig& cfg, double theta_v);

std::vector<float> flatten(const StateTensor& tensor);

/// build_er_model -> select_scope -> encode -> flatten.
std::vector<float> encode_scene(const TrafficScene& scene, const EncoderConfig& cfg,
                                double theta_v);

inline std::size_t input_dim(const EncoderConfig& cfg) {
  return static_cast<std::size_t>(cfg.scope.rows()) * cfg.scope.cols() * kNumLayers;
}

}  // namespace semdrive
