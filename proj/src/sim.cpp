#include "gatesim/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "gatesim/link.hpp"
#include "gatesim/random.hpp"

namespace gatesim::sim {

LightingProfile ideal_profile() { return LightingProfile{"ideal", 0.0, 0.0, 0.0}; }

LightingProfile natural_profile() {
  return LightingProfile{"natural", 0.3, 0.01, 10.0};
}

LightingProfile artificial_profile() {
  return LightingProfile{"artificial", 0.6, 0.05, 60.0};
}

LightingProfile profile_by_name(const std::string& name) {
  if (name == "ideal") return ideal_profile();
  if (name == "natural") return natural_profile();
  if (name == "artificial") return artificial_profile();
  throw ValidationError("unknown lighting profile: " + name);
}

int RunResult::passes() const {
  return static_cast<int>(std::count(gate_passed.begin(), gate_passed.end(), 1));
}

int RunResult::collisions() const {
  return static_cast<int>(
      std::count(gate_collided.begin(), gate_collided.end(), 1));
}

namespace {

// Stabilisation-error disturbance: sigma grows with the square of the current
// speed (normalised at 400 mm/s) and the draw is held for 0.5 s. Faster
// flight blurs the optical-flow input of the platform's stabiliser, so the
// faster strategy pays more.
geom::Vec3 draw_velocity_noise(Rng& rng, const LightingProfile& profile,
                               double speed_mm_s) {
  if (profile.velocity_noise_mm_s <= 0.0) return geom::Vec3::Zero();
  const double scale = std::min(4.0, std::pow(speed_mm_s / 400.0, 3.0));
  const double sigma = profile.velocity_noise_mm_s * scale;
  return geom::Vec3(rng.gaussian(0.0, sigma), rng.gaussian(0.0, sigma),
                    rng.gaussian(0.0, sigma));
}

std::string event_label(const vehicle::GateEvent& e) {
  return (e.kind == vehicle::GateEventKind::Pass ? "pass:" : "collision:") +
         std::to_string(e.gate_index);
}

}  // namespace

RunResult run_closed_loop(const vehicle::Course& course, int strategy,
                          const control::ControlConfig& ccfg,
                          const cam::CameraModel& camera,
                          const vehicle::PlantParams& plant,
                          const LightingProfile& profile, const SimOptions& opts,
                          const CommandChannel& channel,
                          const StateObserver& observer) {
  if (course.gates.empty())
    throw ValidationError("course has no gates");

  RunResult result;
  result.gate_passed.assign(course.gates.size(), 0);
  result.gate_collided.assign(course.gates.size(), 0);

  Rng rng(opts.seed);
  const percep::NoiseProfile noise{profile.pixel_sigma_px,
                                   profile.dropout_prob, opts.seed};
  const auto markers = course.markers();

  vehicle::DroneState state;
  state.position_mm = course.start.position_mm;
  state.yaw_deg = course.start.yaw_deg;

  percep::TrackerState tracker;
  control::StrategyRunner runner(strategy);

  const double cam_dt = 1.0 / opts.camera_rate_hz;
  geom::Vec3 velocity_noise = geom::Vec3::Zero();
  double next_noise_draw_s = 0.0;

  std::vector<double> latencies_ms;
  using clock = std::chrono::steady_clock;

  for (std::size_t tick = 0;; ++tick) {
    const auto tick_start = clock::now();

    const auto observations = percep::observe_markers(
        markers, state.camera_pose_world(), camera, noise, rng, state.t_s);
    std::vector<percep::PoseEstimate> estimates;
    estimates.reserve(observations.size());
    for (const auto& obs : observations) {
      const auto* spec = [&]() -> const percep::MarkerSpec* {
        for (const auto& m : markers)
          if (m.id == obs.id) return &m;
        return nullptr;
      }();
      if (!spec) continue;
      try {
        estimates.push_back(percep::solve_pnp(obs, spec->side_mm, camera));
      } catch (const Error&) {
        // A badly conditioned detection is equivalent to no detection.
      }
    }
    const auto nearest = percep::select_nearest(estimates);
    const auto tracked =
        percep::track(tracker, nearest, cam_dt, opts.tracker_timeout_s);
    tracker = tracked.state;

    const vehicle::VelocityCommand commanded =
        runner.step(tracked.pose, ccfg, cam_dt);

    latencies_ms.push_back(
        std::chrono::duration<double, std::milli>(clock::now() - tick_start)
            .count());

    vehicle::VelocityCommand applied = commanded;
    if (channel) {
      applied = channel(commanded);
    } else if (opts.rc_quantized) {
      applied =
          link::velocity_from_rc(link::rc_from_velocity(commanded, plant), plant);
    }

    if (state.t_s + 1e-12 >= next_noise_draw_s) {
      velocity_noise =
          draw_velocity_noise(rng, profile, state.velocity_world_mm_s.norm());
      next_noise_draw_s = state.t_s + 0.5;
    }

    // Plant substeps up to the next camera tick; the last substep is
    // shortened to land exactly on the tick boundary.
    const double t_next = static_cast<double>(tick + 1) * cam_dt;
    std::vector<std::string> tick_events;
    while (state.t_s < t_next - 1e-9) {
      const double dt = std::min(plant.dt_s, t_next - state.t_s);
      const vehicle::DroneState prev = state;
      state = vehicle::step(prev, applied, plant, velocity_noise, dt);
      if (observer) observer(state);
      for (const auto& ev : vehicle::check_gate_events(
               prev, state, course, opts.drone_radius_mm)) {
        result.events.push_back(ev);
        tick_events.push_back(event_label(ev));
        if (ev.kind == vehicle::GateEventKind::Pass) {
          result.gate_passed[ev.gate_index] = 1;
          if (std::all_of(result.gate_passed.begin(), result.gate_passed.end(),
                          [](char c) { return c != 0; }) &&
              !result.completed) {
            result.completed = true;
            result.lap_time_s = ev.t_s;
          }
        } else {
          result.gate_collided[ev.gate_index] = 1;
        }
      }
    }

    int next_gate = static_cast<int>(course.gates.size());
    for (std::size_t g = 0; g < course.gates.size(); ++g) {
      if (!result.gate_passed[g]) {
        next_gate = static_cast<int>(g);
        break;
      }
    }
    std::string joined;
    for (const auto& e : tick_events) {
      if (!joined.empty()) joined += '|';
      joined += e;
    }
    result.trajectory.push_back(TrajectoryRow{
        state.t_s, state.position_mm, state.yaw_deg, applied, runner.phase(),
        next_gate, joined});

    if (result.completed || state.t_s >= opts.time_cap_s - 1e-9) break;
  }

  result.sim_time_s = state.t_s;
  result.ticks = latencies_ms.size();
  if (!latencies_ms.empty()) {
    double sum = 0.0;
    for (double v : latencies_ms) sum += v;
    result.tick_mean_ms = sum / static_cast<double>(latencies_ms.size());
    std::vector<double> sorted = latencies_ms;
    std::sort(sorted.begin(), sorted.end());
    result.tick_p95_ms =
        sorted[static_cast<std::size_t>(0.95 * (sorted.size() - 1))];
  }
  return result;
}

void write_trajectory_csv(std::ostream& os, const RunResult& result) {
  os << "t,x,y,z,yaw,vx,vy,vz,wz,phase,gate_idx,event\n";
  char buf[256];
  for (const auto& row : result.trajectory) {
    std::snprintf(buf, sizeof buf,
                  "%.4f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%d,%d,%s\n",
                  row.t_s, row.position_mm.x(), row.position_mm.y(),
                  row.position_mm.z(), row.yaw_deg, row.command.vx_mm_s,
                  row.command.vy_mm_s, row.command.vz_mm_s,
                  row.command.wz_deg_s, row.phase, row.gate_idx,
                  row.event.c_str());
    os << buf;
  }
}

}  // namespace gatesim::sim
