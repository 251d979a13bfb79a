#include "doctest.h"

#include "gatesim/calibration.hpp"
#include "gatesim/harness.hpp"
#include "gatesim/levmar.hpp"

using namespace gatesim;
using cam::CameraModel;

namespace {

const CameraModel truth_camera() {
  return CameraModel({920.0, 915.0, 478.0, 362.0, 960, 720},
                     {-0.08, 0.02, 5e-4, -4e-4, 0.0});
}

}  // namespace

TEST_SUITE("calibration") {

TEST_CASE("zero-noise views recover the intrinsics") {
  const CameraModel truth = truth_camera();
  const auto views = harness::synthesize_calibration_views(truth, 10, 0.0, 21);
  const auto result = cam::calibrate_planar(views, 960, 720);

  const auto& in = result.model.intrinsics();
  CHECK(std::abs(in.fx - 920.0) / 920.0 < 1e-6);
  CHECK(std::abs(in.fy - 915.0) / 915.0 < 1e-6);
  CHECK(std::abs(in.cx - 478.0) / 478.0 < 1e-6);
  CHECK(std::abs(in.cy - 362.0) / 362.0 < 1e-6);
  CHECK(result.rms_px < 1e-6);

  const auto& d = result.model.distortion();
  CHECK(std::abs(d.k1 - (-0.08)) < 1e-5);
  CHECK(std::abs(d.k2 - 0.02) < 1e-4);
}

TEST_CASE("noisy views stay within one percent") {
  const CameraModel truth = truth_camera();
  const auto views = harness::synthesize_calibration_views(truth, 10, 0.2, 22);
  const auto result = cam::calibrate_planar(views, 960, 720);

  const auto& in = result.model.intrinsics();
  CHECK(std::abs(in.fx - 920.0) / 920.0 < 0.01);
  CHECK(std::abs(in.fy - 915.0) / 915.0 < 0.01);
  CHECK(std::abs(in.cx - 478.0) / 478.0 < 0.01);
  CHECK(std::abs(in.cy - 362.0) / 362.0 < 0.01);
  // Residual should be on the order of the injected noise.
  CHECK(result.rms_px < 1.0);
}

TEST_CASE("too few views") {
  const CameraModel truth = truth_camera();
  const auto views = harness::synthesize_calibration_views(truth, 2, 0.0, 23);
  CHECK_THROWS_AS((void)cam::calibrate_planar(views, 960, 720),
                  cam::InsufficientDataError);
}

TEST_CASE("near-parallel views are rejected") {
  const CameraModel truth = truth_camera();
  // Three times the same fronto-parallel view: the Zhang system loses rank.
  std::vector<cam::PlanarView> views;
  cam::PlanarView v;
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 8; ++c) {
      const Eigen::Vector2d g((c - 3.5) * 30.0, (r - 2.5) * 30.0);
      v.object_xy.push_back(g);
      v.pixels.push_back(truth.project(geom::Vec3(g.x(), -g.y(), 700.0)));
    }
  }
  views = {v, v, v};
  CHECK_THROWS_AS((void)cam::calibrate_planar(views, 960, 720),
                  cam::ConditioningError);
}

TEST_CASE("optimizer only accepts improving steps") {
  // Quartic bowl with a known minimum.
  const auto f = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(2);
    r << x(0) - 3.0, 10.0 * (x(1) + 1.0) * (x(1) + 1.0);
    return r;
  };
  Eigen::VectorXd x0(2);
  x0 << -5.0, 4.0;
  const double initial = f(x0).squaredNorm();
  const auto result = optim::levenberg_marquardt(f, x0);
  CHECK(result.cost <= initial);
  CHECK(result.converged);
  CHECK(result.x(0) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(result.x(1) == doctest::Approx(-1.0).epsilon(1e-2));
}

TEST_CASE("view poses come back in front of the camera") {
  const CameraModel truth = truth_camera();
  const auto views = harness::synthesize_calibration_views(truth, 5, 0.0, 24);
  const auto result = cam::calibrate_planar(views, 960, 720);
  REQUIRE(result.view_poses.size() == 5);
  for (const auto& pose : result.view_poses)
    CHECK(pose.translation.z() > 0.0);
}

}  // TEST_SUITE
