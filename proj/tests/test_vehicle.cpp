#include "doctest.h"

#include <cmath>

#include "gatesim/random.hpp"
#include "gatesim/vehicle.hpp"

using namespace gatesim;
using geom::Vec3;
using vehicle::Course;
using vehicle::DroneState;
using vehicle::GateEvent;
using vehicle::GateEventKind;
using vehicle::PlantParams;
using vehicle::VelocityCommand;

namespace {

Course single_gate_course(double yaw_deg = 0.0) {
  Course c;
  c.gates.push_back(vehicle::make_gate(Vec3(0, 0, 1200), yaw_deg, 500.0, 0,
                                       150.0,
                                       vehicle::default_marker_offset(500, 150)));
  return c;
}

DroneState at(const Vec3& p, double t) {
  DroneState s;
  s.position_mm = p;
  s.t_s = t;
  return s;
}

// Independent oracle: walk the segment in 1 mm steps and classify the first
// forward plane crossing with freshly written geometry.
std::vector<GateEvent> sampled_events(const DroneState& prev,
                                      const DroneState& next,
                                      const Course& course, double radius) {
  std::vector<GateEvent> events;
  const Vec3 d = next.position_mm - prev.position_mm;
  const double len = d.norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(len)));
  for (size_t gi = 0; gi < course.gates.size(); ++gi) {
    const auto& gate = course.gates[gi];
    const Eigen::Matrix3d R = gate.pose_world.rotation.matrix();
    const Vec3 origin = gate.pose_world.translation;
    auto gate_coords = [&](const Vec3& w) {
      return Vec3(R.transpose() * (w - origin));
    };
    Vec3 a = gate_coords(prev.position_mm);
    for (int k = 1; k <= steps; ++k) {
      const Vec3 w = prev.position_mm + d * (static_cast<double>(k) / steps);
      const Vec3 b = gate_coords(w);
      if (a.z() < 0.0 && b.z() >= 0.0) {
        const double s = -a.z() / (b.z() - a.z());
        const Vec3 hit = a + s * (b - a);
        const double m = std::max(std::abs(hit.x()), std::abs(hit.y()));
        const double half = gate.opening_mm / 2.0;
        const double outer = half + gate.frame_band_mm;
        const double frac = (static_cast<double>(k - 1) + s) / steps;
        const double t = prev.t_s + frac * (next.t_s - prev.t_s);
        if (m <= half)
          events.push_back(GateEvent{GateEventKind::Pass, static_cast<int>(gi),
                                     t, {hit.x(), hit.y()}});
        double dist;
        if (m < half)
          dist = half - m;
        else if (m <= outer)
          dist = 0.0;
        else
          dist = std::hypot(std::max(std::abs(hit.x()) - outer, 0.0),
                            std::max(std::abs(hit.y()) - outer, 0.0));
        if (dist <= radius)
          events.push_back(GateEvent{GateEventKind::Collision,
                                     static_cast<int>(gi), t,
                                     {hit.x(), hit.y()}});
        break;  // this oracle classifies the first crossing only
      }
      a = b;
    }
  }
  return events;
}

}  // namespace

TEST_SUITE("vehicle") {

TEST_CASE("hover leaves the state unchanged except time") {
  const PlantParams p;
  const DroneState s;
  const DroneState n = vehicle::step(s, VelocityCommand{}, p);
  CHECK(n.position_mm.norm() == 0.0);
  CHECK(n.velocity_world_mm_s.norm() == 0.0);
  CHECK(n.yaw_deg == 0.0);
  CHECK(n.t_s == doctest::Approx(p.dt_s));
}

TEST_CASE("first-order lag reaches 63 percent at one time constant") {
  const PlantParams p;
  DroneState s;
  const VelocityCommand cmd{500, 0, 0, 0};
  const int steps = static_cast<int>(std::round(p.tau_v_s / p.dt_s));
  for (int i = 0; i < steps; ++i) s = vehicle::step(s, cmd, p);
  const double expect = 500.0 * (1.0 - std::exp(-1.0));
  CHECK(std::abs(s.velocity_world_mm_s.x() - expect) / expect < 0.01);
}

TEST_CASE("body commands rotate with yaw") {
  const PlantParams p;
  DroneState s;
  s.yaw_deg = 90.0;
  const VelocityCommand cmd{400, 0, 0, 0};
  for (int i = 0; i < 600; ++i) s = vehicle::step(s, cmd, p);
  // Forward at yaw 90 is world +y (3 s of settling, 10 time constants).
  CHECK(s.velocity_world_mm_s.y() == doctest::Approx(400.0).epsilon(1e-3));
  CHECK(std::abs(s.velocity_world_mm_s.x()) < 1e-6);
}

TEST_CASE("kinematic limit as tau goes to zero") {
  PlantParams p;
  p.tau_v_s = 1e-9;
  const DroneState s;
  const VelocityCommand cmd{300, -200, 100, 0};
  const DroneState n = vehicle::step(s, cmd, p);
  const Vec3 expect = p.dt_s * Vec3(300, -200, 100);
  CHECK((n.position_mm - expect).norm() / expect.norm() < 1e-3);
}

TEST_CASE("commands saturate and speed never exceeds v_max") {
  const PlantParams p;
  DroneState s;
  Rng rng(31);
  for (int i = 0; i < 2000; ++i) {
    const VelocityCommand wild{rng.uniform(-5000, 5000),
                               rng.uniform(-5000, 5000),
                               rng.uniform(-5000, 5000),
                               rng.uniform(-500, 500)};
    const DroneState n = vehicle::step(s, wild, p);
    CHECK(n.velocity_world_mm_s.norm() <=
          std::sqrt(3.0) * p.v_max_mm_s * (1 + 1e-9));
    CHECK((n.position_mm - s.position_mm).norm() <=
          std::sqrt(3.0) * p.v_max_mm_s * p.dt_s * (1 + 1e-9));
    s = n;
  }
}

TEST_CASE("step is deterministic") {
  const PlantParams p;
  DroneState s;
  s.yaw_deg = 33.0;
  s.velocity_world_mm_s = Vec3(120, -40, 9);
  const VelocityCommand cmd{150, 75, -30, 12};
  const DroneState a = vehicle::step(s, cmd, p);
  const DroneState b = vehicle::step(s, cmd, p);
  CHECK(a.position_mm == b.position_mm);
  CHECK(a.velocity_world_mm_s == b.velocity_world_mm_s);
  CHECK(a.yaw_deg == b.yaw_deg);
}

TEST_CASE("yaw wraps into (-180, 180]") {
  PlantParams p;
  DroneState s;
  s.yaw_deg = 179.5;
  s.yaw_rate_deg_s = 100.0;
  const VelocityCommand cmd{0, 0, 0, 100};
  for (int i = 0; i < 100; ++i) {
    s = vehicle::step(s, cmd, p);
    CHECK(s.yaw_deg <= 180.0);
    CHECK(s.yaw_deg > -180.0);
  }
}

TEST_CASE("gate events: centre pass, off-centre collision, parallel miss") {
  const Course c = single_gate_course();
  // Gate at yaw 0 has its fly-through normal along world +x.
  const auto pass = vehicle::check_gate_events(
      at(Vec3(-500, 0, 1200), 0.0), at(Vec3(500, 0, 1200), 1.0), c, 120.0);
  REQUIRE(pass.size() == 1);
  CHECK(pass[0].kind == GateEventKind::Pass);
  CHECK(pass[0].gate_index == 0);
  CHECK(pass[0].t_s == doctest::Approx(0.5));

  // 400 mm right of centre: outside the 250 mm half-opening, hits the frame.
  const auto hit = vehicle::check_gate_events(
      at(Vec3(-500, 400, 1200), 0.0), at(Vec3(500, 400, 1200), 1.0), c, 120.0);
  REQUIRE(hit.size() == 1);
  CHECK(hit[0].kind == GateEventKind::Collision);

  // Parallel to the gate plane: nothing.
  CHECK(vehicle::check_gate_events(at(Vec3(-500, -800, 1200), 0.0),
                                   at(Vec3(-500, 800, 1200), 1.0), c, 120.0)
            .empty());

  // Reverse direction: no event either.
  CHECK(vehicle::check_gate_events(at(Vec3(500, 0, 1200), 0.0),
                                   at(Vec3(-500, 0, 1200), 1.0), c, 120.0)
            .empty());
}

TEST_CASE("a graze reports pass and collision") {
  const Course c = single_gate_course();
  // Crossing 240 mm off-centre: inside the opening but within the 120 mm
  // body radius of its edge.
  const auto events = vehicle::check_gate_events(
      at(Vec3(-500, 240, 1200), 0.0), at(Vec3(500, 240, 1200), 1.0), c, 120.0);
  REQUIRE(events.size() == 2);
  CHECK(events[0].kind == GateEventKind::Pass);
  CHECK(events[1].kind == GateEventKind::Collision);
}

TEST_CASE("event detection agrees with the 1 mm sampling oracle") {
  Course c;
  Rng rng(32);
  for (int g = 0; g < 3; ++g)
    c.gates.push_back(vehicle::make_gate(
        Vec3(rng.uniform(-500, 500), rng.uniform(-500, 500),
             rng.uniform(900, 1500)),
        rng.uniform(-180, 180), 500.0, g, 150.0,
        vehicle::default_marker_offset(500, 150)));

  int disagreements = 0;
  for (int i = 0; i < 300; ++i) {
    const DroneState a =
        at(Vec3(rng.uniform(-1500, 1500), rng.uniform(-1500, 1500),
                rng.uniform(800, 1600)),
           0.0);
    const DroneState b =
        at(a.position_mm + Vec3(rng.uniform(-900, 900), rng.uniform(-900, 900),
                                rng.uniform(-300, 300)),
           0.01);
    const auto got = vehicle::check_gate_events(a, b, c, 120.0);
    const auto want = sampled_events(a, b, c, 120.0);
    if (got.size() != want.size()) {
      ++disagreements;
      continue;
    }
    for (size_t k = 0; k < got.size(); ++k) {
      if (got[k].kind != want[k].kind || got[k].gate_index != want[k].gate_index ||
          std::abs(got[k].t_s - want[k].t_s) > 1e-3 ||
          (got[k].crossing_gate_xy - want[k].crossing_gate_xy).norm() > 1e-3)
        ++disagreements;
    }
  }
  CHECK(disagreements == 0);
}

TEST_CASE("course loading applies the marker offset convention") {
  const nlohmann::json doc = {
      {"start", {{"pos", {0, -2000, 1200}}, {"yaw", 0.0}}},
      {"gates",
       {{{"pos", {0, 0, 1200}},
         {"yaw", 0.0},
         {"opening", 500.0},
         {"marker_id", 3},
         {"marker_side", 150.0}}}}};
  const Course c = vehicle::load_course(doc);
  REQUIRE(c.gates.size() == 1);
  CHECK(c.gates[0].marker.id == 3);

  // Marker centre back in the gate frame must be at (175, -175, 0).
  const Vec3 in_gate = transform_point(
      invert(c.gates[0].pose_world), c.gates[0].marker.pose_world.translation);
  CHECK(in_gate.x() == doctest::Approx(175.0));
  CHECK(in_gate.y() == doctest::Approx(-175.0));
  CHECK(std::abs(in_gate.z()) < 1e-9);

  // Marker faces the approach side (-z of the gate).
  const Vec3 normal_world =
      c.gates[0].marker.pose_world.rotation * Vec3(0, 0, 1);
  const Vec3 gate_z = c.gates[0].pose_world.rotation * Vec3(0, 0, 1);
  CHECK(normal_world.dot(gate_z) == doctest::Approx(-1.0));
}

TEST_CASE("course validation rejects bad documents") {
  const nlohmann::json no_gates = {
      {"start", {{"pos", {0, 0, 0}}, {"yaw", 0.0}}},
      {"gates", nlohmann::json::array()}};
  CHECK_THROWS_AS((void)vehicle::load_course(no_gates),
                  vehicle::CourseFormatError);

  nlohmann::json dup = {
      {"start", {{"pos", {0, 0, 0}}, {"yaw", 0.0}}},
      {"gates",
       {{{"pos", {0, 0, 1200}}, {"yaw", 0.0}, {"marker_id", 1}},
        {{"pos", {0, 3000, 1200}}, {"yaw", 0.0}, {"marker_id", 1}}}}};
  CHECK_THROWS_AS((void)vehicle::load_course(dup), vehicle::CourseFormatError);

  nlohmann::json bad_size = {
      {"start", {{"pos", {0, 0, 0}}, {"yaw", 0.0}}},
      {"gates",
       {{{"pos", {0, 0, 1200}}, {"yaw", 0.0}, {"marker_id", 1},
         {"opening", -5.0}}}}};
  CHECK_THROWS_AS((void)vehicle::load_course(bad_size),
                  vehicle::CourseFormatError);

  CHECK_THROWS_AS((void)vehicle::load_course(nlohmann::json::object()),
                  vehicle::CourseFormatError);
}

TEST_CASE("course json round trip") {
  const Course c = single_gate_course(35.0);
  const Course back = vehicle::load_course(vehicle::course_to_json(c));
  REQUIRE(back.gates.size() == 1);
  CHECK((back.gates[0].pose_world.translation -
         c.gates[0].pose_world.translation)
            .norm() < 1e-9);
  CHECK((back.gates[0].pose_world.rotation.matrix() -
         c.gates[0].pose_world.rotation.matrix())
            .cwiseAbs()
            .maxCoeff() < 1e-9);
  CHECK((back.gates[0].marker.pose_world.translation -
         c.gates[0].marker.pose_world.translation)
            .norm() < 1e-9);
}

}  // TEST_SUITE
