#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "gatesim/camera.hpp"
#include "gatesim/control.hpp"
#include "gatesim/perception.hpp"
#include "gatesim/vehicle.hpp"

namespace gatesim::sim {

/// Detector and stabilisation imperfections for one lighting condition. The
/// velocity noise models the platform's optical-flow stabilisation error: a
/// disturbance on the achieved velocity that grows quadratically with speed,
/// redrawn every half second.
struct LightingProfile {
  std::string name = "ideal";
  double pixel_sigma_px = 0.0;
  double dropout_prob = 0.0;
  double velocity_noise_mm_s = 0.0;
};

LightingProfile ideal_profile();
LightingProfile natural_profile();      // daylight
LightingProfile artificial_profile();   // indoor lighting
LightingProfile profile_by_name(const std::string& name);

struct SimOptions {
  double camera_rate_hz = 30.0;
  double tracker_timeout_s = 0.3;
  double time_cap_s = 120.0;
  double drone_radius_mm = vehicle::kDroneRadiusMm;
  std::uint64_t seed = 0;
  /// Pass each command through the rc integer mapping, as the wire protocol
  /// would. Keeps in-process runs identical to loopback runs.
  bool rc_quantized = true;
};

struct TrajectoryRow {
  double t_s;
  geom::Vec3 position_mm;
  double yaw_deg;
  vehicle::VelocityCommand command;
  int phase;
  int gate_idx;
  std::string event;
};

struct RunResult {
  std::vector<vehicle::GateEvent> events;
  std::vector<char> gate_passed;
  std::vector<char> gate_collided;
  bool completed = false;
  double lap_time_s = 0.0;
  double sim_time_s = 0.0;
  std::size_t ticks = 0;
  double tick_mean_ms = 0.0;
  double tick_p95_ms = 0.0;
  std::vector<TrajectoryRow> trajectory;

  int passes() const;
  int collisions() const;
};

/// Delivers a command to the plant and reports what was applied. The default
/// (empty) channel applies the rc quantization in process.
using CommandChannel =
    std::function<vehicle::VelocityCommand(const vehicle::VelocityCommand&)>;

/// Called after every plant substep, e.g. to feed telemetry.
using StateObserver = std::function<void(const vehicle::DroneState&)>;

/// Runs the full observe -> track -> strategy -> plant loop until the course
/// is completed or the time cap expires. Deterministic for a given seed and
/// configuration.
RunResult run_closed_loop(const vehicle::Course& course, int strategy,
                          const control::ControlConfig& ccfg,
                          const cam::CameraModel& camera,
                          const vehicle::PlantParams& plant,
                          const LightingProfile& profile,
                          const SimOptions& opts,
                          const CommandChannel& channel = {},
                          const StateObserver& observer = {});

/// Writes the run's trajectory in the fixed CSV schema
/// t,x,y,z,yaw,vx,vy,vz,wz,phase,gate_idx,event.
void write_trajectory_csv(std::ostream& os, const RunResult& result);

}  // namespace gatesim::sim
