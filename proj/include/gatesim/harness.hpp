#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gatesim/calibration.hpp"
#include "gatesim/sim.hpp"

#include "json.hpp"

namespace gatesim::harness {

/// Pose-accuracy experiment: markers at randomised poses in the visibility
/// volume, noisy observations, PnP, per-axis error statistics.
struct PoseAccuracyConfig {
  int samples = 500;
  double pixel_sigma_px = 0.5;
  std::uint64_t seed = 1;
  double range_min_mm = 700.0;
  double range_max_mm = 1700.0;
  double bearing_max_deg = 30.0;
  double tilt_max_deg = 35.0;
  double marker_side_mm = 150.0;
};

struct PoseAccuracyReport {
  int samples = 0;
  // Mean absolute translation error per axis, mm.
  double mean_abs_x_mm = 0.0, mean_abs_y_mm = 0.0, mean_abs_z_mm = 0.0;
  // Mean absolute orientation error per Euler angle, degrees.
  double mean_abs_phi_deg = 0.0, mean_abs_psi_deg = 0.0,
         mean_abs_theta_deg = 0.0;
  double mean_reprojection_rms_px = 0.0;

  nlohmann::json to_json() const;
};

PoseAccuracyReport run_pose_accuracy(const PoseAccuracyConfig& cfg,
                                     const cam::CameraModel& camera);

/// Generates planar calibration views from a known camera, optionally with
/// corner noise, and returns them together with the ground truth for tests
/// and the CLI demo.
std::vector<cam::PlanarView> synthesize_calibration_views(
    const cam::CameraModel& truth, int views, double pixel_sigma,
    std::uint64_t seed);

/// Seeded desk-scale course: gates spaced so that after each fly-through the
/// next marker is inside the camera's field of view.
vehicle::Course random_course(int gate_count, std::uint64_t seed);

struct CampaignConfig {
  vehicle::Course course;
  int strategy = 1;
  sim::LightingProfile profile = sim::natural_profile();
  int runs = 8;
  std::uint64_t seed = 1;
  control::ControlConfig control;
  vehicle::PlantParams plant;
  sim::SimOptions sim;
  /// When set, per-run trajectory CSVs are written here.
  std::optional<std::filesystem::path> out_dir;
};

struct RunSummary {
  int run = 0;
  int passes = 0;
  int collisions = 0;
  int gates = 0;
  std::vector<char> gate_passed;   // per-gate flags, in course order
  std::vector<char> gate_collided;
  bool completed = false;
  double lap_time_s = 0.0;
  double tick_mean_ms = 0.0;
  double tick_p95_ms = 0.0;
  std::string trajectory_csv;  // path, empty when not written
};

struct CampaignReport {
  std::string strategy;
  std::string profile;
  std::vector<RunSummary> runs;
  double pass_rate = 0.0;       // passed gates / total gates
  double collision_rate = 0.0;  // collided gates / total gates
  double mean_lap_time_s = 0.0;  // over completed runs
  int completed_runs = 0;

  nlohmann::json to_json() const;
};

/// Repeats the closed loop over seeded runs and aggregates the per-gate
/// outcomes the way the flight-test table does.
CampaignReport run_control_campaign(const CampaignConfig& cfg);

struct LiveConfig {
  vehicle::Course course;
  int strategy = 2;
  sim::LightingProfile profile = sim::natural_profile();
  std::uint64_t seed = 1;
  control::ControlConfig control;
  vehicle::PlantParams plant;
  sim::SimOptions sim;
  std::uint16_t command_port = 0;    // 0 = ephemeral
  std::uint16_t telemetry_port = 0;  // 0 = ephemeral client-side port
};

struct LiveReport {
  RunSummary run;
  double achieved_rate_hz = 0.0;  // from mean tick latency incl. the link
  int telemetry_received = 0;
  std::vector<vehicle::GateEvent> events;

  nlohmann::json to_json() const;
};

/// Same loop as the campaign, but every command crosses the UDP loopback
/// link before reaching the plant mailbox.
LiveReport run_live(const LiveConfig& cfg);

}  // namespace gatesim::harness
