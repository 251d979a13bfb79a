#include "gatesim/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "gatesim/link.hpp"
#include "gatesim/random.hpp"

namespace gatesim::harness {

using geom::RigidTransform;
using geom::RotationMatrix;
using geom::Vec3;

namespace {

// Marker orientation facing the camera (marker z towards the viewer, y up on
// the image) with extra in-plane spin and out-of-plane tilts.
RotationMatrix facing_rotation(double spin_deg, double tilt_x_deg,
                               double tilt_y_deg) {
  Eigen::Matrix3d face = Eigen::Matrix3d::Identity();
  face(1, 1) = -1.0;
  face(2, 2) = -1.0;
  return RotationMatrix::from_orthonormal(face) *
         RotationMatrix::rot_z(spin_deg * geom::kDegToRad) *
         RotationMatrix::rot_y(tilt_y_deg * geom::kDegToRad) *
         RotationMatrix::rot_x(tilt_x_deg * geom::kDegToRad);
}

double angle_abs_diff_deg(double a, double b) {
  return std::abs(geom::wrap_deg(a - b));
}

std::uint64_t run_seed(std::uint64_t campaign_seed, int run) {
  return campaign_seed * 1000003ULL + static_cast<std::uint64_t>(run);
}

}  // namespace

PoseAccuracyReport run_pose_accuracy(const PoseAccuracyConfig& cfg,
                                     const cam::CameraModel& camera) {
  if (cfg.samples < 1) throw ValidationError("samples must be >= 1");

  Rng rng(cfg.seed);
  const RigidTransform camera_pose = geom::identity_transform("world");
  // The camera sits at the world origin, so world coordinates below are
  // camera coordinates.
  const percep::NoiseProfile clean{0.0, 0.0, cfg.seed};

  PoseAccuracyReport report;
  report.samples = cfg.samples;

  for (int i = 0; i < cfg.samples; ++i) {
    percep::MarkerSpec marker;
    marker.id = 0;
    marker.side_mm = cfg.marker_side_mm;

    std::vector<percep::MarkerObservation> obs;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const double dist = rng.uniform(cfg.range_min_mm, cfg.range_max_mm);
      const double bearing =
          rng.uniform(-cfg.bearing_max_deg, cfg.bearing_max_deg) *
          geom::kDegToRad;
      const double elevation = rng.uniform(-15.0, 15.0) * geom::kDegToRad;
      Vec3 dir(std::sin(bearing) * std::cos(elevation), std::sin(elevation),
               std::cos(bearing) * std::cos(elevation));
      marker.pose_world = RigidTransform{
          facing_rotation(rng.uniform(-180.0, 180.0),
                          rng.uniform(-cfg.tilt_max_deg, cfg.tilt_max_deg),
                          rng.uniform(-cfg.tilt_max_deg, cfg.tilt_max_deg)),
          dist * dir.normalized(), "marker0", "world"};

      Rng probe(0);  // the clean probe consumes no draws, any seed works
      obs = percep::observe_markers({&marker, 1}, camera_pose, camera, clean,
                                    probe, 0.0);
      if (!obs.empty()) break;
    }
    if (obs.empty())
      throw NumericError("could not sample a visible marker pose");

    auto noisy_obs = obs[0];
    if (cfg.pixel_sigma_px > 0.0) {
      for (auto& corner : noisy_obs.corners) {
        corner.u += rng.gaussian(0.0, cfg.pixel_sigma_px);
        corner.v += rng.gaussian(0.0, cfg.pixel_sigma_px);
      }
    }

    const percep::PoseEstimate est =
        percep::solve_pnp(noisy_obs, marker.side_mm, camera);

    const Vec3 dt = est.transform.translation - marker.pose_world.translation;
    report.mean_abs_x_mm += std::abs(dt.x());
    report.mean_abs_y_mm += std::abs(dt.y());
    report.mean_abs_z_mm += std::abs(dt.z());

    const geom::EulerAngles truth =
        geom::rotation_to_euler(marker.pose_world.rotation);
    const geom::EulerAngles found =
        geom::rotation_to_euler(est.transform.rotation);
    report.mean_abs_phi_deg += angle_abs_diff_deg(found.phi_deg, truth.phi_deg);
    report.mean_abs_psi_deg += std::abs(found.psi_deg - truth.psi_deg);
    report.mean_abs_theta_deg +=
        angle_abs_diff_deg(found.theta_deg, truth.theta_deg);
    report.mean_reprojection_rms_px += est.reprojection_rms_px;
  }

  const double n = static_cast<double>(cfg.samples);
  report.mean_abs_x_mm /= n;
  report.mean_abs_y_mm /= n;
  report.mean_abs_z_mm /= n;
  report.mean_abs_phi_deg /= n;
  report.mean_abs_psi_deg /= n;
  report.mean_abs_theta_deg /= n;
  report.mean_reprojection_rms_px /= n;
  return report;
}

nlohmann::json PoseAccuracyReport::to_json() const {
  return nlohmann::json{
      {"samples", samples},
      {"translation_mean_abs_error_mm",
       {{"x", mean_abs_x_mm}, {"y", mean_abs_y_mm}, {"z", mean_abs_z_mm}}},
      {"orientation_mean_abs_error_deg",
       {{"phi", mean_abs_phi_deg},
        {"psi", mean_abs_psi_deg},
        {"theta", mean_abs_theta_deg}}},
      {"mean_reprojection_rms_px", mean_reprojection_rms_px}};
}

std::vector<cam::PlanarView> synthesize_calibration_views(
    const cam::CameraModel& truth, int views, double pixel_sigma,
    std::uint64_t seed) {
  Rng rng(seed);

  // 9x7 target grid, 40 mm pitch, centred on the target origin. A target
  // that fills a good part of the frame anchors the optical centre and the
  // distortion tail.
  std::vector<Eigen::Vector2d> grid;
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 9; ++c)
      grid.emplace_back((c - 4.0) * 40.0, (r - 3.0) * 40.0);

  std::vector<cam::PlanarView> out;
  while (static_cast<int>(out.size()) < views) {
    const RotationMatrix R =
        facing_rotation(rng.uniform(-20.0, 20.0), rng.uniform(-40.0, 40.0),
                        rng.uniform(-40.0, 40.0));
    const Vec3 t(rng.uniform(-120.0, 120.0), rng.uniform(-90.0, 90.0),
                 rng.uniform(600.0, 1100.0));

    cam::PlanarView view;
    bool ok = true;
    for (const auto& g : grid) {
      const Vec3 p = R * Vec3(g.x(), g.y(), 0.0) + t;
      if (!(p.z() > 1.0)) {
        ok = false;
        break;
      }
      const cam::PixelPoint px = truth.project(p);
      if (!truth.contains(px)) {
        ok = false;
        break;
      }
      view.object_xy.push_back(g);
      view.pixels.push_back(px);
    }
    if (!ok) continue;
    if (pixel_sigma > 0.0) {
      for (auto& px : view.pixels) {
        px.u += rng.gaussian(0.0, pixel_sigma);
        px.v += rng.gaussian(0.0, pixel_sigma);
      }
    }
    out.push_back(std::move(view));
  }
  return out;
}

vehicle::Course random_course(int gate_count, std::uint64_t seed) {
  if (gate_count < 1) throw ValidationError("course needs at least one gate");
  Rng rng(seed);

  vehicle::Course course;
  const double base_height = 1200.0;

  double heading_deg = rng.uniform(-180.0, 180.0);
  Vec3 position(0.0, 0.0, base_height);

  for (int g = 0; g < gate_count; ++g) {
    const double spacing = g == 0 ? 0.0 : rng.uniform(2800.0, 3400.0);
    const double bearing_deg = heading_deg + rng.uniform(-8.0, 8.0);
    const double b = bearing_deg * geom::kDegToRad;
    position += spacing * Vec3(std::cos(b), std::sin(b), 0.0);
    position.z() = base_height + rng.uniform(-80.0, 80.0);

    const double gate_yaw = bearing_deg + rng.uniform(-8.0, 8.0);
    course.gates.push_back(vehicle::make_gate(
        position, gate_yaw, 500.0, g, 150.0,
        vehicle::default_marker_offset(500.0, 150.0)));
    heading_deg = gate_yaw;
  }

  // Start 2 m before the first gate on its axis, facing it.
  const auto& first = course.gates.front().pose_world;
  const Vec3 normal = first.rotation * Vec3(0, 0, 1);
  course.start.position_mm =
      first.translation - 2000.0 * normal +
      Vec3(rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0),
           rng.uniform(-50.0, 50.0));
  course.start.yaw_deg =
      std::atan2(normal.y(), normal.x()) * geom::kRadToDeg +
      rng.uniform(-10.0, 10.0);
  return course;
}

CampaignReport run_control_campaign(const CampaignConfig& cfg) {
  if (cfg.runs < 1) throw ValidationError("campaign needs runs >= 1");
  if (cfg.course.gates.empty())
    throw ValidationError("campaign course has no gates");

  const cam::CameraModel camera = cam::default_camera();

  CampaignReport report;
  report.strategy = std::to_string(cfg.strategy);
  report.profile = cfg.profile.name;

  const int gates = static_cast<int>(cfg.course.gates.size());
  int passed = 0, collided = 0;
  double lap_sum = 0.0;

  if (cfg.out_dir) std::filesystem::create_directories(*cfg.out_dir);

  for (int r = 0; r < cfg.runs; ++r) {
    sim::SimOptions opts = cfg.sim;
    opts.seed = run_seed(cfg.seed, r);
    const sim::RunResult res =
        sim::run_closed_loop(cfg.course, cfg.strategy, cfg.control, camera,
                             cfg.plant, cfg.profile, opts);

    RunSummary summary;
    summary.run = r + 1;
    summary.passes = res.passes();
    summary.collisions = res.collisions();
    summary.gates = gates;
    summary.gate_passed = res.gate_passed;
    summary.gate_collided = res.gate_collided;
    summary.completed = res.completed;
    summary.lap_time_s = res.lap_time_s;
    summary.tick_mean_ms = res.tick_mean_ms;
    summary.tick_p95_ms = res.tick_p95_ms;

    if (cfg.out_dir) {
      char name[64];
      std::snprintf(name, sizeof name, "s%d_%s_run%02d.csv", cfg.strategy,
                    cfg.profile.name.c_str(), r + 1);
      const auto path = *cfg.out_dir / name;
      std::ofstream os(path);
      sim::write_trajectory_csv(os, res);
      summary.trajectory_csv = path.string();
    }

    passed += summary.passes;
    collided += summary.collisions;
    if (res.completed) {
      lap_sum += res.lap_time_s;
      ++report.completed_runs;
    }
    report.runs.push_back(summary);
  }

  const double total = static_cast<double>(gates * cfg.runs);
  report.pass_rate = passed / total;
  report.collision_rate = collided / total;
  report.mean_lap_time_s =
      report.completed_runs > 0 ? lap_sum / report.completed_runs : 0.0;
  return report;
}

nlohmann::json CampaignReport::to_json() const {
  nlohmann::json runs_json = nlohmann::json::array();
  for (const auto& r : runs) {
    std::vector<bool> passed(r.gate_passed.begin(), r.gate_passed.end());
    std::vector<bool> collided(r.gate_collided.begin(), r.gate_collided.end());
    runs_json.push_back({{"run", r.run},
                         {"passes", r.passes},
                         {"collisions", r.collisions},
                         {"gates", r.gates},
                         {"gate_passed", passed},
                         {"gate_collided", collided},
                         {"completed", r.completed},
                         {"lap_time_s", r.lap_time_s},
                         {"tick_mean_ms", r.tick_mean_ms},
                         {"tick_p95_ms", r.tick_p95_ms},
                         {"trajectory_csv", r.trajectory_csv}});
  }
  return nlohmann::json{{"strategy", strategy},
                        {"profile", profile},
                        {"runs", runs_json},
                        {"overall",
                         {{"pass_rate", pass_rate},
                          {"collision_rate", collision_rate},
                          {"mean_lap_time_s", mean_lap_time_s},
                          {"completed_runs", completed_runs}}}};
}

LiveReport run_live(const LiveConfig& cfg) {
  const cam::CameraModel camera = cam::default_camera();

  link::LinkServer server(cfg.command_port, link::kDefaultTelemetryPort,
                          cfg.plant);
  link::LinkClient client(server.command_port());
  client.open_telemetry(cfg.telemetry_port);
  server.set_telemetry_port(client.telemetry_port());
  server.start();

  if (!client.send(link::EnterSdk{}).ok)
    throw Error("link: could not enter SDK mode");
  if (!client.send(link::Takeoff{}).ok) throw Error("link: takeoff refused");

  const auto channel =
      [&](const vehicle::VelocityCommand& cmd) -> vehicle::VelocityCommand {
    const link::Rc rc = link::rc_from_velocity(cmd, cfg.plant);
    const link::Response resp = client.send(rc);
    if (!resp.ok) throw Error("link rejected command: " + resp.error);
    return server.current_command();
  };
  const auto observer = [&](const vehicle::DroneState& s) {
    server.publish_state(s);
  };

  const auto wall_start = std::chrono::steady_clock::now();
  const sim::RunResult res =
      sim::run_closed_loop(cfg.course, cfg.strategy, cfg.control, camera,
                           cfg.plant, cfg.profile, cfg.sim, channel, observer);
  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    wall_start)
          .count();

  client.send(link::Land{});

  LiveReport report;
  report.run.run = 1;
  report.run.passes = res.passes();
  report.run.collisions = res.collisions();
  report.run.gates = static_cast<int>(cfg.course.gates.size());
  report.run.gate_passed = res.gate_passed;
  report.run.gate_collided = res.gate_collided;
  report.run.completed = res.completed;
  report.run.lap_time_s = res.lap_time_s;
  report.run.tick_mean_ms = res.tick_mean_ms;
  report.run.tick_p95_ms = res.tick_p95_ms;
  report.achieved_rate_hz =
      wall_s > 0.0 ? static_cast<double>(res.ticks) / wall_s : 0.0;
  report.events = res.events;

  while (client.poll_telemetry(0)) ++report.telemetry_received;

  server.stop();
  return report;
}

nlohmann::json LiveReport::to_json() const {
  return nlohmann::json{{"passes", run.passes},
                        {"collisions", run.collisions},
                        {"gates", run.gates},
                        {"completed", run.completed},
                        {"lap_time_s", run.lap_time_s},
                        {"tick_mean_ms", run.tick_mean_ms},
                        {"tick_p95_ms", run.tick_p95_ms},
                        {"achieved_rate_hz", achieved_rate_hz},
                        {"telemetry_received", telemetry_received}};
}

}  // namespace gatesim::harness
