#include "gatesim/control.hpp"

#include <algorithm>

namespace gatesim::control {

using geom::RigidTransform;
using geom::RotationMatrix;
using geom::Vec3;
using vehicle::VelocityCommand;

double p_control(double error, double kp, double limit) {
  return std::clamp(kp * error, -limit, limit);
}

namespace {

// marker<-gate for a marker at offset (mx, my) in the gate plane, facing the
// approach side (marker x = -gate x, y = gate y, z = -gate z).
RigidTransform marker_from_gate(const ControlConfig& cfg,
                                const std::string& marker_frame) {
  Eigen::Matrix3d Rm = Eigen::Matrix3d::Identity();
  Rm(0, 0) = -1.0;
  Rm(2, 2) = -1.0;
  return RigidTransform{
      RotationMatrix::from_orthonormal(Rm),
      Vec3(cfg.marker_offset_mm.x(), -cfg.marker_offset_mm.y(), 0.0),
      "gate", marker_frame};
}

double bearing_deg(const Vec3& p_body) {
  return std::atan2(p_body.y(), p_body.x()) * geom::kRadToDeg;
}

}  // namespace

GateView analyze_gate(const percep::PoseEstimate& pose,
                      const ControlConfig& cfg) {
  const RigidTransform body_from_marker =
      compose(vehicle::camera_mount(), pose.transform);
  const RigidTransform body_from_gate = compose(
      body_from_marker, marker_from_gate(cfg, pose.transform.from_frame));
  const RigidTransform gate_from_body = invert(body_from_gate);

  GateView view;
  view.body_from_gate = body_from_gate;
  view.drone_in_gate = gate_from_body.translation;
  view.gate_centre_body = body_from_gate.translation;
  view.gate_normal_body = body_from_gate.rotation * Vec3(0, 0, 1);
  view.marker_centre_body = body_from_marker.translation;
  view.marker_bearing_deg = bearing_deg(view.marker_centre_body);
  view.gate_bearing_deg = bearing_deg(view.gate_centre_body);
  view.facing_error_deg = bearing_deg(view.gate_normal_body);
  return view;
}

Vec3 target_to_body(const percep::PoseEstimate& pose,
                    const Vec3& target_in_gate, const ControlConfig& cfg) {
  const GateView view = analyze_gate(pose, cfg);
  return transform_point(view.body_from_gate, target_in_gate);
}

StepResultOne step_strategy_one(const StrategyOneState& s,
                                const std::optional<percep::PoseEstimate>& pose,
                                const ControlConfig& cfg, double dt) {
  using Phase = StrategyOneState::Phase;
  StrategyOneState st = s;
  VelocityCommand cmd;
  const Gains& g = cfg.gains;

  if (st.phase == Phase::FlyThrough) {
    if (st.phase5_elapsed_s >= cfg.t5_s - 1e-9) {
      st.phase = Phase::Rotate;
      st.phase5_elapsed_s = 0.0;
      st.target_marker_id.reset();
      st.marker_lost_s = 0.0;
    } else {
      st.phase5_elapsed_s += dt;
      cmd.vx_mm_s = cfg.fly_through_speed_mm_s;
      return {cmd, st};
    }
  }

  // One cycle works one gate: phase 1 adopts whatever marker the tracker
  // offers, the committed phases ignore other markers.
  std::optional<percep::PoseEstimate> target_pose = pose;
  if (pose) {
    if (st.phase == Phase::Rotate)
      st.target_marker_id = pose->marker_id;
    else if (st.target_marker_id && pose->marker_id != *st.target_marker_id)
      target_pose.reset();
  }

  if (target_pose) {
    st.marker_lost_s = 0.0;
  } else if (st.phase != Phase::Rotate) {
    st.marker_lost_s += dt;
    if (st.marker_lost_s > cfg.dt2_s) {
      // The committed marker is gone for good: this attempt is over, start
      // a fresh search.
      st.phase = Phase::Rotate;
      st.target_marker_id.reset();
      st.marker_lost_s = 0.0;
    }
  }

  if (!target_pose) return {cmd, st};  // hold position, wait for the tracker

  const GateView view = analyze_gate(*target_pose, cfg);
  const double alpha1_deg = cfg.alpha1_rad * geom::kRadToDeg;

  // Forward transitions; several may fire on the same tick.
  if (st.phase == Phase::Rotate &&
      std::abs(view.marker_bearing_deg) < alpha1_deg)
    st.phase = Phase::Approach;
  if (st.phase == Phase::Approach && -view.drone_in_gate.z() <= cfg.d2_mm)
    st.phase = Phase::FacePlane;
  if (st.phase == Phase::FacePlane &&
      std::abs(view.facing_error_deg) < cfg.facing_tol_deg)
    st.phase = Phase::AlignLateral;
  if (st.phase == Phase::AlignLateral &&
      std::abs(view.drone_in_gate.x()) < cfg.lateral_tol_mm) {
    st.phase = Phase::FlyThrough;
    st.phase5_elapsed_s = dt;
    cmd.vx_mm_s = cfg.fly_through_speed_mm_s;
    return {cmd, st};
  }

  // Altitude is servoed to the gate-centre height in every vision phase.
  cmd.vz_mm_s = p_control(-view.drone_in_gate.y(), g.kp_z, g.limit_vz);

  switch (st.phase) {
    case Phase::Rotate:
      cmd.wz_deg_s = p_control(view.marker_bearing_deg, g.kp_yaw, g.limit_wz);
      break;
    case Phase::Approach:
      cmd.vx_mm_s = std::min(cfg.cruise_speed_mm_s, g.limit_vx);
      cmd.wz_deg_s = p_control(view.marker_bearing_deg, g.kp_yaw, g.limit_wz);
      break;
    case Phase::FacePlane:
      cmd.wz_deg_s = p_control(view.facing_error_deg, g.kp_yaw, g.limit_wz);
      break;
    case Phase::AlignLateral: {
      const Vec3 target(0.0, 0.0, view.drone_in_gate.z());
      const Vec3 err = transform_point(view.body_from_gate, target);
      cmd.vy_mm_s = p_control(err.y(), g.kp_y, g.limit_vy);
      cmd.wz_deg_s = p_control(view.facing_error_deg, g.kp_yaw, g.limit_wz);
      break;
    }
    case Phase::FlyThrough:
      break;  // handled above
  }
  return {cmd, st};
}

StepResultTwo step_strategy_two(const StrategyTwoState& s,
                                const std::optional<percep::PoseEstimate>& pose,
                                const ControlConfig& cfg, double dt) {
  using Phase = StrategyTwoState::Phase;
  StrategyTwoState st = s;
  VelocityCommand cmd;
  const Gains& g = cfg.gains;

  if (st.phase == Phase::FlyThrough) {
    if (st.phase3_elapsed_s >= cfg.t3_s - 1e-9) {
      st.phase = Phase::StandoffApproach;
      st.phase3_elapsed_s = 0.0;
      st.marker_lost_s = 0.0;
      st.target_marker_id.reset();
    } else {
      st.phase3_elapsed_s += dt;
      cmd.vx_mm_s = cfg.fly_through_speed_mm_s;
      return {cmd, st};
    }
  }

  // As in strategy 1: the standoff phase adopts the tracked marker, the
  // committed approach counts any other marker as "not visible".
  std::optional<percep::PoseEstimate> target_pose = pose;
  if (pose) {
    if (st.phase == Phase::StandoffApproach)
      st.target_marker_id = pose->marker_id;
    else if (st.target_marker_id && pose->marker_id != *st.target_marker_id)
      target_pose.reset();
  }

  if (target_pose)
    st.marker_lost_s = 0.0;
  else
    st.marker_lost_s += dt;

  if (st.phase == Phase::GateApproach && st.marker_lost_s > cfg.dt2_s) {
    st.phase = Phase::FlyThrough;
    st.phase3_elapsed_s = dt;
    cmd.vx_mm_s = cfg.fly_through_speed_mm_s;
    return {cmd, st};
  }

  if (!target_pose) {
    if (st.phase == Phase::GateApproach) {
      // Committed to the gate: keep moving forward while the loss timer runs.
      cmd.vx_mm_s = cfg.fly_through_speed_mm_s;
    }
    return {cmd, st};  // standoff phase holds position
  }

  const GateView view = analyze_gate(*target_pose, cfg);

  if (st.phase == Phase::StandoffApproach &&
      std::abs(view.drone_in_gate.x()) <= cfg.delta2_mm)
    st.phase = Phase::GateApproach;

  const Vec3 target = st.phase == Phase::StandoffApproach
                          ? Vec3(0.0, 0.0, -cfg.d1_mm)
                          : Vec3::Zero();
  const Vec3 err = transform_point(view.body_from_gate, target);

  cmd.vx_mm_s = p_control(err.x(), g.kp_x, g.limit_vx);
  cmd.vy_mm_s = p_control(err.y(), g.kp_y, g.limit_vy);
  cmd.vz_mm_s = p_control(err.z(), g.kp_z, g.limit_vz);
  cmd.wz_deg_s = p_control(view.gate_bearing_deg, g.kp_yaw, g.limit_wz);

  if (st.phase == Phase::GateApproach) {
    // Forward bias: never stall short of the plane while it is still ahead.
    const double floor = 0.5 * cfg.fly_through_speed_mm_s;
    if (view.drone_in_gate.z() < 0.0 && cmd.vx_mm_s < floor)
      cmd.vx_mm_s = floor;
  }
  return {cmd, st};
}

vehicle::VelocityCommand StrategyRunner::step(
    const std::optional<percep::PoseEstimate>& pose, const ControlConfig& cfg,
    double dt) {
  if (id_ == 1) {
    auto [cmd, next] = step_strategy_one(s1_, pose, cfg, dt);
    s1_ = next;
    return cmd;
  }
  auto [cmd, next] = step_strategy_two(s2_, pose, cfg, dt);
  s2_ = next;
  return cmd;
}

int StrategyRunner::phase() const {
  return id_ == 1 ? static_cast<int>(s1_.phase) : static_cast<int>(s2_.phase);
}

nlohmann::json ControlConfig::to_json() const {
  return nlohmann::json{
      {"alpha1_rad", alpha1_rad},
      {"d2_mm", d2_mm},
      {"t5_s", t5_s},
      {"d1_mm", d1_mm},
      {"delta2_mm", delta2_mm},
      {"dt2_s", dt2_s},
      {"t3_s", t3_s},
      {"lateral_tol_mm", lateral_tol_mm},
      {"facing_tol_deg", facing_tol_deg},
      {"cruise_speed_mm_s", cruise_speed_mm_s},
      {"fly_through_speed_mm_s", fly_through_speed_mm_s},
      {"marker_offset_mm", {marker_offset_mm.x(), marker_offset_mm.y()}},
      {"gains",
       {{"kp_yaw", gains.kp_yaw},
        {"kp_x", gains.kp_x},
        {"kp_y", gains.kp_y},
        {"kp_z", gains.kp_z},
        {"limit_vx", gains.limit_vx},
        {"limit_vy", gains.limit_vy},
        {"limit_vz", gains.limit_vz},
        {"limit_wz", gains.limit_wz}}}};
}

ControlConfig ControlConfig::from_json(const nlohmann::json& j) {
  ControlConfig c;
  try {
    c.alpha1_rad = j.value("alpha1_rad", c.alpha1_rad);
    c.d2_mm = j.value("d2_mm", c.d2_mm);
    c.t5_s = j.value("t5_s", c.t5_s);
    c.d1_mm = j.value("d1_mm", c.d1_mm);
    c.delta2_mm = j.value("delta2_mm", c.delta2_mm);
    c.dt2_s = j.value("dt2_s", c.dt2_s);
    c.t3_s = j.value("t3_s", c.t3_s);
    c.lateral_tol_mm = j.value("lateral_tol_mm", c.lateral_tol_mm);
    c.facing_tol_deg = j.value("facing_tol_deg", c.facing_tol_deg);
    c.cruise_speed_mm_s = j.value("cruise_speed_mm_s", c.cruise_speed_mm_s);
    c.fly_through_speed_mm_s =
        j.value("fly_through_speed_mm_s", c.fly_through_speed_mm_s);
    if (j.contains("marker_offset_mm")) {
      const auto& mo = j.at("marker_offset_mm");
      if (mo.size() != 2)
        throw ValidationError("marker_offset_mm must be [gx,gy]");
      c.marker_offset_mm =
          Eigen::Vector2d(mo[0].get<double>(), mo[1].get<double>());
    }
    if (j.contains("gains")) {
      const auto& gj = j.at("gains");
      c.gains.kp_yaw = gj.value("kp_yaw", c.gains.kp_yaw);
      c.gains.kp_x = gj.value("kp_x", c.gains.kp_x);
      c.gains.kp_y = gj.value("kp_y", c.gains.kp_y);
      c.gains.kp_z = gj.value("kp_z", c.gains.kp_z);
      c.gains.limit_vx = gj.value("limit_vx", c.gains.limit_vx);
      c.gains.limit_vy = gj.value("limit_vy", c.gains.limit_vy);
      c.gains.limit_vz = gj.value("limit_vz", c.gains.limit_vz);
      c.gains.limit_wz = gj.value("limit_wz", c.gains.limit_wz);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad control config: ") + e.what());
  }
  return c;
}

}  // namespace gatesim::control
