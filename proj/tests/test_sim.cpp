#include "doctest.h"

#include <sstream>

#include "gatesim/harness.hpp"
#include "gatesim/sim.hpp"

using namespace gatesim;

namespace {

harness::CampaignConfig small_campaign(int strategy, std::uint64_t seed) {
  harness::CampaignConfig cfg;
  cfg.course = harness::random_course(2, seed);
  cfg.strategy = strategy;
  cfg.profile = sim::natural_profile();
  cfg.runs = 2;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("pose accuracy is exact without noise") {
  harness::PoseAccuracyConfig cfg;
  cfg.samples = 40;
  cfg.pixel_sigma_px = 0.0;
  cfg.seed = 5;
  const auto report =
      harness::run_pose_accuracy(cfg, cam::default_camera());
  CHECK(report.mean_abs_x_mm < 1e-6);
  CHECK(report.mean_abs_y_mm < 1e-6);
  CHECK(report.mean_abs_z_mm < 1e-6);
  CHECK(report.mean_abs_phi_deg < 1e-6);
  CHECK(report.mean_abs_psi_deg < 1e-6);
  CHECK(report.mean_abs_theta_deg < 1e-6);
}

TEST_CASE("pose accuracy report carries the table axes") {
  harness::PoseAccuracyConfig cfg;
  cfg.samples = 5;
  cfg.pixel_sigma_px = 0.0;
  const auto j =
      harness::run_pose_accuracy(cfg, cam::default_camera()).to_json();
  const auto& tr = j.at("translation_mean_abs_error_mm");
  CHECK(tr.contains("x"));
  CHECK(tr.contains("y"));
  CHECK(tr.contains("z"));
  CHECK(tr.size() == 3);
  const auto& rot = j.at("orientation_mean_abs_error_deg");
  CHECK(rot.contains("phi"));
  CHECK(rot.contains("psi"));
  CHECK(rot.contains("theta"));
  CHECK(rot.size() == 3);
}

TEST_CASE("campaign aggregates match the per-run rows") {
  const auto report = harness::run_control_campaign(small_campaign(2, 9));
  int passes = 0, collisions = 0, gates = 0;
  for (const auto& r : report.runs) {
    passes += r.passes;
    collisions += r.collisions;
    gates += r.gates;
  }
  CHECK(report.pass_rate == doctest::Approx(double(passes) / gates));
  CHECK(report.collision_rate == doctest::Approx(double(collisions) / gates));
  CHECK(report.runs.size() == 2);
}

TEST_CASE("empty courses are rejected") {
  harness::CampaignConfig cfg = small_campaign(1, 4);
  cfg.course.gates.clear();
  CHECK_THROWS_AS((void)harness::run_control_campaign(cfg), ValidationError);
}

TEST_CASE("identical seeds give byte-identical trajectories") {
  const auto course = harness::random_course(2, 14);
  sim::SimOptions opts;
  opts.seed = 77;
  const control::ControlConfig ccfg;
  const vehicle::PlantParams plant;

  auto run_csv = [&] {
    const auto res =
        sim::run_closed_loop(course, 2, ccfg, cam::default_camera(), plant,
                             sim::natural_profile(), opts);
    std::ostringstream os;
    sim::write_trajectory_csv(os, res);
    return os.str();
  };
  const std::string a = run_csv();
  const std::string b = run_csv();
  CHECK(a == b);
  CHECK(a.substr(0, a.find('\n')) ==
        "t,x,y,z,yaw,vx,vy,vz,wz,phase,gate_idx,event");
}

TEST_CASE("different seeds differ") {
  const auto course = harness::random_course(2, 14);
  const control::ControlConfig ccfg;
  const vehicle::PlantParams plant;
  sim::SimOptions a, b;
  a.seed = 1;
  b.seed = 2;
  const auto ra = sim::run_closed_loop(course, 2, ccfg, cam::default_camera(),
                                       plant, sim::natural_profile(), a);
  const auto rb = sim::run_closed_loop(course, 2, ccfg, cam::default_camera(),
                                       plant, sim::natural_profile(), b);
  std::ostringstream osa, osb;
  sim::write_trajectory_csv(osa, ra);
  sim::write_trajectory_csv(osb, rb);
  CHECK(osa.str() != osb.str());
}

TEST_CASE("in-process and loopback runs see identical events") {
  harness::LiveConfig cfg;
  cfg.course = harness::random_course(2, 21);
  cfg.strategy = 2;
  cfg.profile = sim::natural_profile();
  cfg.seed = 21;
  cfg.sim.seed = 21;

  const auto live = harness::run_live(cfg);

  sim::SimOptions opts = cfg.sim;
  const auto local =
      sim::run_closed_loop(cfg.course, cfg.strategy, cfg.control,
                           cam::default_camera(), cfg.plant, cfg.profile, opts);

  REQUIRE(live.events.size() == local.events.size());
  for (size_t i = 0; i < live.events.size(); ++i) {
    CHECK(live.events[i].kind == local.events[i].kind);
    CHECK(live.events[i].gate_index == local.events[i].gate_index);
    CHECK(live.events[i].t_s == doctest::Approx(local.events[i].t_s));
  }
  CHECK(live.run.completed == local.completed);
  CHECK(live.telemetry_received > 0);
  CHECK(live.achieved_rate_hz > 25.0);
}

TEST_CASE("profiles are looked up by name") {
  CHECK(sim::profile_by_name("natural").pixel_sigma_px ==
        doctest::Approx(0.3));
  CHECK(sim::profile_by_name("artificial").dropout_prob ==
        doctest::Approx(0.05));
  CHECK(sim::profile_by_name("ideal").velocity_noise_mm_s == 0.0);
  CHECK_THROWS_AS((void)sim::profile_by_name("dusk"), ValidationError);
}

TEST_CASE("random course chains gates within sight") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const auto course = harness::random_course(3, seed);
    REQUIRE(course.gates.size() == 3);
    for (size_t g = 1; g < course.gates.size(); ++g) {
      const auto& prev = course.gates[g - 1].pose_world;
      const auto& next = course.gates[g].pose_world;
      const geom::Vec3 gap = next.translation - prev.translation;
      CHECK(gap.norm() > 2500.0);
      CHECK(gap.norm() < 3600.0);
      // The next gate sits roughly along the previous fly-through direction.
      const geom::Vec3 dir = prev.rotation * geom::Vec3(0, 0, 1);
      CHECK(gap.normalized().dot(dir) > 0.9);
    }
  }
}

}  // TEST_SUITE
