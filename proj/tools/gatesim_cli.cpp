// Command-line front end for the experiments: pose-accuracy statistics,
// closed-loop control campaigns, a live run over the UDP loopback link, and
// a standalone plant server speaking the wire protocol.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "gatesim/harness.hpp"
#include "gatesim/link.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw gatesim::ValidationError("cannot open " + path);
  json j;
  is >> j;
  return j;
}

struct SharedConfig {
  gatesim::control::ControlConfig control;
  gatesim::vehicle::PlantParams plant;
  std::optional<gatesim::sim::LightingProfile> custom_profile;
  std::optional<double> min_pass_rate;
  std::optional<double> max_collision_rate;
};

SharedConfig load_shared_config(const std::string& path) {
  SharedConfig out;
  if (path.empty()) return out;
  const json j = load_json_file(path);
  if (j.contains("control"))
    out.control = gatesim::control::ControlConfig::from_json(j.at("control"));
  if (j.contains("plant")) {
    const auto& p = j.at("plant");
    out.plant.tau_v_s = p.value("tau_v_s", out.plant.tau_v_s);
    out.plant.tau_w_s = p.value("tau_w_s", out.plant.tau_w_s);
    out.plant.v_max_mm_s = p.value("v_max_mm_s", out.plant.v_max_mm_s);
    out.plant.w_max_deg_s = p.value("w_max_deg_s", out.plant.w_max_deg_s);
    out.plant.dt_s = p.value("dt_s", out.plant.dt_s);
  }
  if (j.contains("profile")) {
    const auto& pr = j.at("profile");
    gatesim::sim::LightingProfile custom;
    custom.name = "custom";
    custom.pixel_sigma_px = pr.value("pixel_sigma_px", 0.0);
    custom.dropout_prob = pr.value("dropout_prob", 0.0);
    custom.velocity_noise_mm_s = pr.value("velocity_noise_mm_s", 0.0);
    out.custom_profile = custom;
  }
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    if (t.contains("min_pass_rate"))
      out.min_pass_rate = t.at("min_pass_rate").get<double>();
    if (t.contains("max_collision_rate"))
      out.max_collision_rate = t.at("max_collision_rate").get<double>();
  }
  return out;
}

gatesim::sim::LightingProfile resolve_profile(const std::string& name,
                                              const SharedConfig& shared) {
  if (name == "custom") {
    if (!shared.custom_profile)
      throw gatesim::ValidationError(
          "--profile custom needs a \"profile\" block in --config");
    return *shared.custom_profile;
  }
  return gatesim::sim::profile_by_name(name);
}

gatesim::vehicle::Course resolve_course(const std::string& course_path,
                                        int random_gates,
                                        std::uint64_t seed) {
  if (!course_path.empty())
    return gatesim::vehicle::load_course(load_json_file(course_path));
  if (random_gates > 0) return gatesim::harness::random_course(random_gates, seed);
  throw gatesim::ValidationError("need --course or --random-gates");
}

void write_report(const fs::path& out_dir, const std::string& name,
                  const json& j) {
  fs::create_directories(out_dir);
  const fs::path path = out_dir / name;
  std::ofstream os(path);
  os << j.dump(2) << "\n";
  std::cout << "wrote " << path.string() << "\n";
}

std::atomic<bool> g_stop{false};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"marker-guided drone racing simulation and experiments"};
  app.require_subcommand(1);

  std::string course_path, profile_name = "natural", out_dir = "out",
              config_path;
  int strategy = 1, runs = 8, random_gates = 0, samples = 500;
  std::uint64_t seed = 1;
  double pixel_sigma = 0.5;
  std::uint16_t cmd_port = gatesim::link::kDefaultCommandPort;
  std::uint16_t telem_port = gatesim::link::kDefaultTelemetryPort;

  auto* pose = app.add_subcommand("pose-accuracy",
                                  "marker pose estimation error statistics");
  pose->add_option("--samples", samples, "number of sampled poses");
  pose->add_option("--sigma", pixel_sigma, "corner noise, px");
  pose->add_option("--seed", seed);
  pose->add_option("--out", out_dir);

  auto* campaign =
      app.add_subcommand("campaign", "seeded closed-loop pass/collision runs");
  campaign->add_option("--course", course_path, "course JSON file");
  campaign->add_option("--random-gates", random_gates,
                       "generate a random course with N gates");
  campaign->add_option("--strategy", strategy)->check(CLI::Range(1, 2));
  campaign->add_option("--profile", profile_name,
                       "ideal | natural | artificial | custom");
  campaign->add_option("--runs", runs);
  campaign->add_option("--seed", seed);
  campaign->add_option("--out", out_dir);
  campaign->add_option("--config", config_path, "control/plant config JSON");

  auto* live =
      app.add_subcommand("live", "one closed-loop run over the UDP link");
  live->add_option("--course", course_path);
  live->add_option("--random-gates", random_gates);
  live->add_option("--strategy", strategy)->check(CLI::Range(1, 2));
  live->add_option("--profile", profile_name);
  live->add_option("--seed", seed);
  live->add_option("--out", out_dir);
  live->add_option("--config", config_path);

  auto* serve = app.add_subcommand("serve", "wall-clock plant UDP server");
  serve->add_option("--cmd-port", cmd_port);
  serve->add_option("--telem-port", telem_port);
  serve->add_option("--config", config_path);

  CLI11_PARSE(app, argc, argv);

  try {
    if (pose->parsed()) {
      gatesim::harness::PoseAccuracyConfig cfg;
      cfg.samples = samples;
      cfg.pixel_sigma_px = pixel_sigma;
      cfg.seed = seed;
      const auto report =
          gatesim::harness::run_pose_accuracy(cfg, gatesim::cam::default_camera());
      std::cout << report.to_json().dump(2) << "\n";
      write_report(out_dir, "pose_accuracy.json", report.to_json());
      return 0;
    }

    if (campaign->parsed()) {
      const SharedConfig shared = load_shared_config(config_path);
      gatesim::harness::CampaignConfig cfg;
      cfg.course = resolve_course(course_path, random_gates, seed);
      cfg.strategy = strategy;
      cfg.profile = resolve_profile(profile_name, shared);
      cfg.runs = runs;
      cfg.seed = seed;
      cfg.control = shared.control;
      cfg.plant = shared.plant;
      cfg.out_dir = fs::path(out_dir);
      const auto report = gatesim::harness::run_control_campaign(cfg);
      std::cout << report.to_json().dump(2) << "\n";
      write_report(out_dir, "campaign_summary.json", report.to_json());

      if (shared.min_pass_rate && report.pass_rate < *shared.min_pass_rate) {
        std::cerr << "pass rate " << report.pass_rate << " below threshold "
                  << *shared.min_pass_rate << "\n";
        return 1;
      }
      if (shared.max_collision_rate &&
          report.collision_rate > *shared.max_collision_rate) {
        std::cerr << "collision rate " << report.collision_rate
                  << " above threshold " << *shared.max_collision_rate << "\n";
        return 1;
      }
      return 0;
    }

    if (live->parsed()) {
      const SharedConfig shared = load_shared_config(config_path);
      gatesim::harness::LiveConfig cfg;
      cfg.course = resolve_course(course_path, random_gates, seed);
      cfg.strategy = strategy;
      cfg.profile = resolve_profile(profile_name, shared);
      cfg.seed = seed;
      cfg.sim.seed = seed;
      cfg.control = shared.control;
      cfg.plant = shared.plant;
      const auto report = gatesim::harness::run_live(cfg);
      std::cout << report.to_json().dump(2) << "\n";
      write_report(out_dir, "live_report.json", report.to_json());
      return 0;
    }

    if (serve->parsed()) {
      const SharedConfig shared = load_shared_config(config_path);
      gatesim::link::LinkServer server(cmd_port, telem_port, shared.plant);
      server.start();
      std::signal(SIGINT, [](int) { g_stop.store(true); });
      std::cout << "serving on udp://127.0.0.1:" << server.command_port()
                << " (telemetry to sender:" << telem_port << ")\n";
      gatesim::link::serve_plant(server, gatesim::vehicle::DroneState{},
                                 shared.plant, g_stop);
      server.stop();
      return 0;
    }
  } catch (const gatesim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
