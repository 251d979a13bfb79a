#pragma once

#include <string>
#include <vector>

#include "gatesim/geometry.hpp"
#include "gatesim/perception.hpp"

#include "json.hpp"

namespace gatesim::vehicle {

/// Body-frame velocity command: x forward, y left, z up (mm/s) and yaw rate
/// (deg/s, positive counter-clockwise).
struct VelocityCommand {
  double vx_mm_s = 0.0;
  double vy_mm_s = 0.0;
  double vz_mm_s = 0.0;
  double wz_deg_s = 0.0;

  VelocityCommand clamped(double v_max, double w_max) const;
};

/// First-order-lag plant parameters. The platform's inner loop is a black
/// box, so the plant is the simplest model that still penalises abrupt
/// direction changes.
struct PlantParams {
  double tau_v_s = 0.3;
  double tau_w_s = 0.15;
  double v_max_mm_s = 1000.0;
  double w_max_deg_s = 100.0;
  double dt_s = 0.005;
};

/// World-frame vehicle state. The camera is rigidly mounted looking along
/// body +x; see camera_mount().
struct DroneState {
  geom::Vec3 position_mm = geom::Vec3::Zero();
  double yaw_deg = 0.0;
  geom::Vec3 velocity_world_mm_s = geom::Vec3::Zero();
  double yaw_rate_deg_s = 0.0;
  double t_s = 0.0;

  geom::RigidTransform body_pose_world() const;  // world<-drone
  geom::RigidTransform camera_pose_world() const;  // world<-camera
};

/// Fixed drone<-camera mounting: camera z along body x (optical axis
/// forward), camera x along body -y (image right), camera y along body -z
/// (image down). Zero translation offset.
const geom::RigidTransform& camera_mount();

/// Advances the plant by params.dt_s (or dt_override when positive, used to
/// land exactly on camera ticks). The commanded velocity is rotated to the
/// world frame by the current yaw and tracked through a first-order lag
/// discretised implicitly, which keeps the speed inside v_max for any step
/// size; position then integrates the updated velocity. velocity_error is an
/// additive world-frame disturbance on the achieved velocity (mm/s), used by
/// the experiment profiles to model imperfect internal stabilisation.
DroneState step(const DroneState& s, const VelocityCommand& cmd,
                const PlantParams& p,
                const geom::Vec3& velocity_error = geom::Vec3::Zero(),
                double dt_override = -1.0);

/// Racing gate: square opening with a structural border, carrying one marker
/// in the bottom-right corner region of its plane. Gate frame: x right,
/// y up, z the fly-through normal.
struct GateSpec {
  geom::RigidTransform pose_world;  // world<-gate
  double opening_mm = 500.0;
  double frame_band_mm = 50.0;
  percep::MarkerSpec marker;
};

struct StartPose {
  geom::Vec3 position_mm = geom::Vec3::Zero();
  double yaw_deg = 0.0;
};

struct Course {
  std::vector<GateSpec> gates;
  StartPose start;

  std::vector<percep::MarkerSpec> markers() const;
};

enum class GateEventKind { Pass, Collision };

struct GateEvent {
  GateEventKind kind;
  int gate_index;
  double t_s;
  Eigen::Vector2d crossing_gate_xy;  // crossing point in the gate plane, mm
};

/// Default drone collision radius (sphere around the body centre).
constexpr double kDroneRadiusMm = 120.0;

/// Classifies every gate-plane crossing of the segment prev -> next (in the
/// +z direction of the gate). A crossing through the opening with full
/// clearance is a pass; any crossing whose body sphere touches the frame band
/// is a collision; a graze through the opening close to its edge reports
/// both.
std::vector<GateEvent> check_gate_events(const DroneState& prev,
                                         const DroneState& next,
                                         const Course& course,
                                         double drone_radius_mm);

/// Builds an upright gate at a world position: yaw orients the fly-through
/// normal in the horizontal plane, gate y is world up. The marker sits in the
/// gate plane at the given gate-frame offset, facing the approach side (-z).
GateSpec make_gate(const geom::Vec3& position_mm, double yaw_deg,
                   double opening_mm, int marker_id, double marker_side_mm,
                   const Eigen::Vector2d& marker_offset_mm);

/// Default gate-frame marker-centre offset for a 500 mm opening and 150 mm
/// marker: inscribed in the bottom-right corner of the opening.
Eigen::Vector2d default_marker_offset(double opening_mm, double marker_side_mm);

class CourseFormatError : public ValidationError {
 public:
  explicit CourseFormatError(const std::string& what)
      : ValidationError(what) {}
};

/// Parses and validates a course document (see README for the schema).
Course load_course(const nlohmann::json& doc);
nlohmann::json course_to_json(const Course& course);

}  // namespace gatesim::vehicle
