#pragma once

#include <cmath>
#include <optional>

#include "gatesim/geometry.hpp"
#include "gatesim/perception.hpp"
#include "gatesim/vehicle.hpp"

#include "json.hpp"

namespace gatesim::control {

/// Proportional gains and per-axis output limits.
struct Gains {
  double kp_yaw = 0.8;  // (deg/s) per deg
  double kp_x = 0.8;    // (mm/s) per mm
  double kp_y = 0.8;
  double kp_z = 0.8;
  double limit_vx = 600.0;  // mm/s
  double limit_vy = 600.0;
  double limit_vz = 400.0;
  double limit_wz = 80.0;  // deg/s
};

/// All named constants of both strategies. Values are the published defaults
/// where the source gives one; gains and tolerances were tuned on the
/// simulated plant.
struct ControlConfig {
  double alpha1_rad = std::atan(0.2);  // phase-1 exit bearing, strategy 1
  double d2_mm = 800.0;    // strategy-1 approach distance to the marker plane
  double t5_s = 5.0;       // strategy-1 fly-through duration
  double d1_mm = 900.0;    // strategy-2 standoff distance from the gate
  double delta2_mm = 150.0;  // strategy-2 lateral band entering the approach
  double dt2_s = 0.3;      // strategy-2 marker-loss timeout
  double t3_s = 2.0;       // strategy-2 fly-through duration
  double lateral_tol_mm = 80.0;  // strategy-1 phase-4 stop band
  double facing_tol_deg = 3.0;    // strategy-1 phase-3 exit tolerance
  double cruise_speed_mm_s = 400.0;
  double fly_through_speed_mm_s = 400.0;
  Gains gains;
  /// Marker-centre offset in the gate frame used to convert marker poses to
  /// gate poses; must match the course convention.
  Eigen::Vector2d marker_offset_mm{175.0, -175.0};

  nlohmann::json to_json() const;
  static ControlConfig from_json(const nlohmann::json& j);
};

/// clamp(kp * error, -limit, +limit).
double p_control(double error, double kp, double limit);

/// Everything the strategies need from one marker pose, expressed in the
/// body frame via the fixed camera mounting and the marker->gate offset.
struct GateView {
  geom::Vec3 drone_in_gate;       // drone position in the gate frame, mm
  geom::Vec3 gate_centre_body;    // mm
  geom::Vec3 gate_normal_body;    // unit, fly-through direction
  geom::Vec3 marker_centre_body;  // mm
  double marker_bearing_deg;  // horizontal angle to the marker, +left
  double gate_bearing_deg;    // horizontal angle to the gate centre, +left
  double facing_error_deg;    // yaw needed to face the fly-through direction
  geom::RigidTransform body_from_gate;
};

GateView analyze_gate(const percep::PoseEstimate& pose,
                      const ControlConfig& cfg);

/// Body-frame error vector from the drone to a target given in the gate
/// frame, derived from the camera<-marker estimate, the fixed body<-camera
/// mounting and the marker->gate offset convention.
geom::Vec3 target_to_body(const percep::PoseEstimate& pose,
                          const geom::Vec3& target_in_gate,
                          const ControlConfig& cfg);

/// Strategy 1 phases (drone-native coordinates): rotate towards the marker,
/// fly straight at it, turn to face the gate plane, slide to the gate axis,
/// then a timed straight fly-through.
struct StrategyOneState {
  enum class Phase {
    Rotate = 1,
    Approach = 2,
    FacePlane = 3,
    AlignLateral = 4,
    FlyThrough = 5
  };
  Phase phase = Phase::Rotate;
  double phase5_elapsed_s = 0.0;
  /// Marker of the gate currently being attempted. Adopted from whatever
  /// pose phase 1 receives; later phases ignore poses of other markers so
  /// one cycle works one gate. Cleared by the phase-5 reset.
  std::optional<int> target_marker_id;
  /// Seconds since the committed marker was last seen. When it exceeds the
  /// loss timeout in phases 2-4 the attempt is abandoned back to phase 1.
  double marker_lost_s = 0.0;
};

/// Strategy 2 phases (gate coordinates): servo to the standoff point on the
/// gate axis, approach the gate centre, then a timed straight fly-through
/// once the marker has been out of sight long enough.
struct StrategyTwoState {
  enum class Phase { StandoffApproach = 1, GateApproach = 2, FlyThrough = 3 };
  Phase phase = Phase::StandoffApproach;
  double marker_lost_s = 0.0;
  double phase3_elapsed_s = 0.0;
  /// Marker of the gate currently being attempted; see StrategyOneState.
  std::optional<int> target_marker_id;
};

struct StepResultOne {
  vehicle::VelocityCommand command;
  StrategyOneState state;
};

struct StepResultTwo {
  vehicle::VelocityCommand command;
  StrategyTwoState state;
};

StepResultOne step_strategy_one(const StrategyOneState& s,
                                const std::optional<percep::PoseEstimate>& pose,
                                const ControlConfig& cfg, double dt);

StepResultTwo step_strategy_two(const StrategyTwoState& s,
                                const std::optional<percep::PoseEstimate>& pose,
                                const ControlConfig& cfg, double dt);

/// Uniform handle over the two strategies for the simulation loop.
class StrategyRunner {
 public:
  explicit StrategyRunner(int strategy_id) : id_(strategy_id) {
    if (strategy_id != 1 && strategy_id != 2)
      throw ValidationError("strategy must be 1 or 2");
  }

  vehicle::VelocityCommand step(const std::optional<percep::PoseEstimate>& pose,
                                const ControlConfig& cfg, double dt);
  int phase() const;
  int strategy_id() const { return id_; }

 private:
  int id_;
  StrategyOneState s1_;
  StrategyTwoState s2_;
};

}  // namespace gatesim::control
