#include "gatesim/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace gatesim::vehicle {

using geom::RigidTransform;
using geom::RotationMatrix;
using geom::Vec3;

VelocityCommand VelocityCommand::clamped(double v_max, double w_max) const {
  return VelocityCommand{std::clamp(vx_mm_s, -v_max, v_max),
                         std::clamp(vy_mm_s, -v_max, v_max),
                         std::clamp(vz_mm_s, -v_max, v_max),
                         std::clamp(wz_deg_s, -w_max, w_max)};
}

RigidTransform DroneState::body_pose_world() const {
  return RigidTransform{RotationMatrix::rot_z(yaw_deg * geom::kDegToRad),
                        position_mm, "drone", "world"};
}

RigidTransform DroneState::camera_pose_world() const {
  return compose(body_pose_world(), camera_mount());
}

const RigidTransform& camera_mount() {
  static const RigidTransform mount = [] {
    // Optical axis pitched 10 degrees below body x: markers sit in the lower
    // corner of the gates, and a level camera loses their bottom corners at
    // close range.
    const double p = 10.0 * geom::kDegToRad;
    Eigen::Matrix3d m;
    // Columns: camera x, y, z axes expressed in the body frame.
    m << 0, -std::sin(p), std::cos(p),
        -1, 0, 0,
        0, -std::cos(p), -std::sin(p);
    return RigidTransform{RotationMatrix::from_matrix(m), Vec3::Zero(),
                          "camera", "drone"};
  }();
  return mount;
}

DroneState step(const DroneState& s, const VelocityCommand& cmd,
                const PlantParams& p, const Vec3& velocity_error,
                double dt_override) {
  const double dt = dt_override > 0.0 ? dt_override : p.dt_s;
  const VelocityCommand c = cmd.clamped(p.v_max_mm_s, p.w_max_deg_s);

  const Eigen::Matrix3d Rz =
      RotationMatrix::rot_z(s.yaw_deg * geom::kDegToRad).matrix();
  const Vec3 v_cmd_world = Rz * Vec3(c.vx_mm_s, c.vy_mm_s, c.vz_mm_s);

  // Implicit first-order lag: the new velocity is a convex combination of the
  // old one and the command, so it never leaves the saturation ball.
  const double av = (dt / p.tau_v_s) / (1.0 + dt / p.tau_v_s);
  const double aw = (dt / p.tau_w_s) / (1.0 + dt / p.tau_w_s);

  DroneState n = s;
  n.velocity_world_mm_s = s.velocity_world_mm_s +
                          av * (v_cmd_world - s.velocity_world_mm_s);
  n.yaw_rate_deg_s = s.yaw_rate_deg_s + aw * (c.wz_deg_s - s.yaw_rate_deg_s);
  n.position_mm = s.position_mm + dt * (n.velocity_world_mm_s + velocity_error);
  n.yaw_deg = geom::wrap_deg(s.yaw_deg + dt * n.yaw_rate_deg_s);
  n.t_s = s.t_s + dt;
  return n;
}

std::vector<percep::MarkerSpec> Course::markers() const {
  std::vector<percep::MarkerSpec> out;
  out.reserve(gates.size());
  for (const auto& g : gates) out.push_back(g.marker);
  return out;
}

namespace {

// Euclidean distance from a point in the gate plane to the frame annulus
// {half_opening <= max(|x|, |y|) <= half_opening + band}.
double distance_to_frame(const Eigen::Vector2d& q, double half_opening,
                         double band) {
  const double m = std::max(std::abs(q.x()), std::abs(q.y()));
  const double outer = half_opening + band;
  if (m < half_opening) return half_opening - m;  // inside the opening
  if (m <= outer) return 0.0;                     // on the frame
  const double dx = std::max(std::abs(q.x()) - outer, 0.0);
  const double dy = std::max(std::abs(q.y()) - outer, 0.0);
  return std::hypot(dx, dy);
}

}  // namespace

std::vector<GateEvent> check_gate_events(const DroneState& prev,
                                         const DroneState& next,
                                         const Course& course,
                                         double drone_radius_mm) {
  std::vector<GateEvent> events;
  for (size_t gi = 0; gi < course.gates.size(); ++gi) {
    const GateSpec& gate = course.gates[gi];
    const RigidTransform gate_from_world = invert(gate.pose_world);
    const Vec3 p0 = transform_point(gate_from_world, prev.position_mm);
    const Vec3 p1 = transform_point(gate_from_world, next.position_mm);

    // Crossing of the gate plane in the fly-through direction only.
    if (!(p0.z() < 0.0 && p1.z() >= 0.0)) continue;
    const double s = -p0.z() / (p1.z() - p0.z());
    const Vec3 hit = p0 + s * (p1 - p0);
    const Eigen::Vector2d q(hit.x(), hit.y());
    const double t_hit = prev.t_s + s * (next.t_s - prev.t_s);

    const double half = gate.opening_mm / 2.0;
    const bool through_opening =
        std::max(std::abs(q.x()), std::abs(q.y())) <= half;
    const bool touches_frame =
        distance_to_frame(q, half, gate.frame_band_mm) <= drone_radius_mm;

    if (through_opening)
      events.push_back(
          GateEvent{GateEventKind::Pass, static_cast<int>(gi), t_hit, q});
    if (touches_frame)
      events.push_back(
          GateEvent{GateEventKind::Collision, static_cast<int>(gi), t_hit, q});
  }
  return events;
}

Eigen::Vector2d default_marker_offset(double opening_mm,
                                      double marker_side_mm) {
  const double inset = opening_mm / 2.0 - marker_side_mm / 2.0;
  return Eigen::Vector2d(inset, -inset);
}

GateSpec make_gate(const Vec3& position_mm, double yaw_deg, double opening_mm,
                   int marker_id, double marker_side_mm,
                   const Eigen::Vector2d& marker_offset_mm) {
  const double a = yaw_deg * geom::kDegToRad;
  Eigen::Matrix3d R;
  // Columns: gate x (right), y (up = world z), z (fly-through normal,
  // horizontal at the given yaw).
  R << -std::sin(a), 0, std::cos(a),
       std::cos(a), 0, std::sin(a),
       0, 1, 0;

  GateSpec g;
  g.pose_world = RigidTransform{RotationMatrix::from_matrix(R), position_mm,
                                "gate", "world"};
  g.opening_mm = opening_mm;

  // Marker faces the approach side: marker z = -gate z, marker y = gate y.
  Eigen::Matrix3d Rm = Eigen::Matrix3d::Identity();
  Rm(0, 0) = -1.0;
  Rm(2, 2) = -1.0;
  const RigidTransform gate_from_marker{
      RotationMatrix::from_matrix(Rm),
      Vec3(marker_offset_mm.x(), marker_offset_mm.y(), 0.0), "marker", "gate"};
  g.marker.id = marker_id;
  g.marker.side_mm = marker_side_mm;
  g.marker.pose_world = compose(g.pose_world, gate_from_marker);
  g.marker.pose_world.from_frame = "marker" + std::to_string(marker_id);
  return g;
}

Course load_course(const nlohmann::json& doc) {
  Course course;
  try {
    const auto& start = doc.at("start");
    const auto& pos = start.at("pos");
    if (pos.size() != 3) throw CourseFormatError("start.pos must be [x,y,z]");
    course.start.position_mm =
        Vec3(pos[0].get<double>(), pos[1].get<double>(), pos[2].get<double>());
    course.start.yaw_deg = start.at("yaw").get<double>();

    const auto& gates = doc.at("gates");
    if (!gates.is_array() || gates.empty())
      throw CourseFormatError("course needs at least one gate");

    std::set<int> marker_ids;
    for (const auto& gj : gates) {
      const auto& gpos = gj.at("pos");
      if (gpos.size() != 3) throw CourseFormatError("gate.pos must be [x,y,z]");
      const Vec3 position(gpos[0].get<double>(), gpos[1].get<double>(),
                          gpos[2].get<double>());
      const double yaw = gj.at("yaw").get<double>();
      const double opening = gj.value("opening", 500.0);
      const int marker_id = gj.at("marker_id").get<int>();
      const double marker_side = gj.value("marker_side", 150.0);
      Eigen::Vector2d offset = default_marker_offset(opening, marker_side);
      if (gj.contains("marker_offset")) {
        const auto& mo = gj.at("marker_offset");
        if (mo.size() != 2)
          throw CourseFormatError("marker_offset must be [gx,gy]");
        offset = Eigen::Vector2d(mo[0].get<double>(), mo[1].get<double>());
      }
      if (!(opening > 0.0) || !(marker_side > 0.0))
        throw CourseFormatError("sizes must be positive");
      if (!marker_ids.insert(marker_id).second)
        throw CourseFormatError("duplicate marker id " +
                                std::to_string(marker_id));
      course.gates.push_back(
          make_gate(position, yaw, opening, marker_id, marker_side, offset));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CourseFormatError(std::string("bad course document: ") + e.what());
  }
  return course;
}

nlohmann::json course_to_json(const Course& course) {
  nlohmann::json gates = nlohmann::json::array();
  for (const auto& g : course.gates) {
    const Vec3& p = g.pose_world.translation;
    const Eigen::Matrix3d& R = g.pose_world.rotation.matrix();
    const double yaw = std::atan2(R(1, 2), R(0, 2)) * geom::kRadToDeg;
    const RigidTransform gate_from_marker =
        compose(invert(g.pose_world), g.marker.pose_world);
    gates.push_back(
        {{"pos", {p.x(), p.y(), p.z()}},
         {"yaw", yaw},
         {"opening", g.opening_mm},
         {"marker_id", g.marker.id},
         {"marker_side", g.marker.side_mm},
         {"marker_offset",
          {gate_from_marker.translation.x(), gate_from_marker.translation.y()}}});
  }
  const Vec3& sp = course.start.position_mm;
  return nlohmann::json{
      {"start", {{"pos", {sp.x(), sp.y(), sp.z()}}, {"yaw", course.start.yaw_deg}}},
      {"gates", gates}};
}

}  // namespace gatesim::vehicle
