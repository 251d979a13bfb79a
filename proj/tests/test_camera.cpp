#include "doctest.h"

#include <Eigen/Dense>

#include <vector>

#include "gatesim/camera.hpp"
#include "gatesim/random.hpp"

using namespace gatesim;
using cam::CameraModel;
using cam::Distortion;
using cam::Intrinsics;
using cam::PixelPoint;
using geom::Vec3;

namespace {

const Intrinsics kIntr{900.0, 900.0, 480.0, 360.0, 960, 720};

// Scalar evaluation of the distortion polynomial, written independently of
// CameraModel so it can serve as the projection oracle.
PixelPoint project_oracle(const Intrinsics& in, const Distortion& d,
                          const Vec3& p) {
  const double x = p.x() / p.z();
  const double y = p.y() / p.z();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + d.k1 * r2 + d.k2 * r2 * r2 + d.k3 * r2 * r2 * r2;
  const double xd = x * radial + 2 * d.p1 * x * y + d.p2 * (r2 + 2 * x * x);
  const double yd = y * radial + d.p1 * (r2 + 2 * y * y) + 2 * d.p2 * x * y;
  return {in.fx * xd + in.cx, in.fy * yd + in.cy};
}

}  // namespace

TEST_SUITE("camera") {

TEST_CASE("projection on and off the optical axis") {
  const CameraModel cam(kIntr, {});
  const PixelPoint centre = cam.project(Vec3(0, 0, 1000));
  CHECK(centre.u == doctest::Approx(480.0));
  CHECK(centre.v == doctest::Approx(360.0));

  const PixelPoint off = cam.project(Vec3(100, 0, 1000));
  CHECK(off.u == doctest::Approx(570.0));
  CHECK(off.v == doctest::Approx(360.0));
}

TEST_CASE("projection matches the scalar distortion oracle") {
  const Distortion dist{-0.1, 0.0, 0.0, 0.0, 0.0};
  const CameraModel cam(kIntr, dist);
  const PixelPoint got = cam.project(Vec3(100, 0, 1000));
  const PixelPoint want = project_oracle(kIntr, dist, Vec3(100, 0, 1000));
  CHECK(std::abs(got.u - want.u) < 1e-9);
  CHECK(std::abs(got.v - want.v) < 1e-9);

  const Distortion full{-0.1, 0.02, 1e-3, -5e-4, 5e-3};
  const CameraModel cam2(kIntr, full);
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const Vec3 p(rng.uniform(-300, 300), rng.uniform(-220, 220),
                 rng.uniform(600, 2000));
    const PixelPoint a = cam2.project(p);
    const PixelPoint b = project_oracle(kIntr, full, p);
    CHECK(std::abs(a.u - b.u) < 1e-9);
    CHECK(std::abs(a.v - b.v) < 1e-9);
  }
}

TEST_CASE("behind-camera points are rejected") {
  const CameraModel cam(kIntr, {});
  CHECK_THROWS_AS((void)cam.project(Vec3(0, 0, -100)), cam::BehindCameraError);
  CHECK_THROWS_AS((void)cam.project(Vec3(0, 0, 0)), cam::BehindCameraError);
}

TEST_CASE("projection is scale invariant") {
  const CameraModel cam(kIntr, {-0.08, 0.01, 5e-4, -4e-4, 0});
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const Vec3 p(rng.uniform(-250, 250), rng.uniform(-180, 180),
                 rng.uniform(500, 1500));
    const double lambda = rng.uniform(0.1, 10.0);
    const PixelPoint a = cam.project(p);
    const PixelPoint b = cam.project(lambda * p);
    CHECK(std::abs(a.u - b.u) < 1e-9);
    CHECK(std::abs(a.v - b.v) < 1e-9);
  }
}

TEST_CASE("undistort inverts projection") {
  SUBCASE("zero distortion is exact") {
    const CameraModel cam(kIntr, {});
    const Vec3 p(123.0, -45.0, 987.0);
    const auto n = cam.undistort(cam.project(p));
    CHECK(n.x == doctest::Approx(p.x() / p.z()).epsilon(1e-12));
    CHECK(n.y == doctest::Approx(p.y() / p.z()).epsilon(1e-12));
  }

  SUBCASE("k1 round trip") {
    const CameraModel cam(kIntr, {-0.1, 0, 0, 0, 0});
    const PixelPoint px{570.0, 360.0};
    const auto n = cam.undistort(px);
    const auto d = cam.distort({n.x, n.y});
    CHECK(std::abs(kIntr.fx * d.x + kIntr.cx - px.u) < 1e-6);
    CHECK(std::abs(kIntr.fy * d.y + kIntr.cy - px.v) < 1e-6);
  }

  SUBCASE("round trip over a grid, several distortion sets") {
    const Distortion sets[] = {{-0.1, 0.02, 1e-3, 1e-3, 1e-3},
                               {0.08, -0.01, -5e-4, 8e-4, 0.0},
                               {-0.25, 0.05, 0.0, 0.0, -0.01},
                               {0.0, 0.0, 2e-3, -2e-3, 0.0}};
    for (const auto& set : sets) {
      const CameraModel cam(kIntr, set);
      double worst = 0.0;
      for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
          // Central 80% of the sensor.
          const PixelPoint px{96.0 + 768.0 * i / 4.0, 72.0 + 576.0 * j / 4.0};
          const auto n = cam.undistort(px);
          const auto d = cam.distort({n.x, n.y});
          worst = std::max(worst,
                           std::hypot(kIntr.fx * d.x + kIntr.cx - px.u,
                                      kIntr.fy * d.y + kIntr.cy - px.v));
        }
      }
      CHECK(worst < 1e-6);
    }
  }
}

TEST_CASE("camera model validation") {
  CHECK_THROWS_AS(CameraModel({0, 900, 480, 360, 960, 720}, {}),
                  ValidationError);
  CHECK_THROWS_AS(CameraModel({900, 900, 2000, 360, 960, 720}, {}),
                  ValidationError);
  // Distortion so strong the inversion cannot settle on the sensor.
  CHECK_THROWS_AS(CameraModel(kIntr, {-9.0, 10.0, 0, 0, -12.0}), Error);
}

TEST_CASE("camera json round trip") {
  const CameraModel cam(kIntr, {-0.1, 0.02, 1e-3, -5e-4, 5e-3});
  const CameraModel back = CameraModel::from_json(cam.to_json());
  CHECK(back.intrinsics().fx == cam.intrinsics().fx);
  CHECK(back.intrinsics().width == cam.intrinsics().width);
  CHECK(back.distortion().k3 == cam.distortion().k3);
  CHECK_THROWS_AS((void)CameraModel::from_json({{"fx", 900.0}}),
                  ValidationError);
}

TEST_CASE("homography identity and translation") {
  const std::vector<Eigen::Vector2d> square = {
      {0, 0}, {100, 0}, {100, 100}, {0, 100}};
  const Eigen::Matrix3d H = cam::estimate_homography(square, square);
  CHECK((H - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);

  std::vector<Eigen::Vector2d> shifted;
  for (const auto& p : square) shifted.push_back(p + Eigen::Vector2d(10, 5));
  const Eigen::Matrix3d T = cam::estimate_homography(square, shifted);
  CHECK(T(0, 2) == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(T(1, 2) == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("homography recovers a random projective map") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix3d H_true;
    H_true << 1 + rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
        rng.uniform(-40, 40), rng.uniform(-0.2, 0.2),
        1 + rng.uniform(-0.2, 0.2), rng.uniform(-40, 40),
        rng.uniform(-2e-4, 2e-4), rng.uniform(-2e-4, 2e-4), 1.0;

    std::vector<Eigen::Vector2d> src, dst;
    for (int i = 0; i < 20; ++i) {
      const Eigen::Vector2d s(rng.uniform(-200, 200), rng.uniform(-200, 200));
      const Eigen::Vector3d d = H_true * s.homogeneous();
      src.push_back(s);
      dst.emplace_back(d.x() / d.z(), d.y() / d.z());
    }
    const Eigen::Matrix3d H = cam::estimate_homography(src, dst);
    CHECK((H - H_true).cwiseAbs().maxCoeff() /
              H_true.cwiseAbs().maxCoeff() <
          1e-8);
  }
}

TEST_CASE("degenerate homography input is rejected") {
  const std::vector<Eigen::Vector2d> collinear = {
      {0, 0}, {1, 0}, {2, 0}, {3, 0}};
  const std::vector<Eigen::Vector2d> square = {
      {0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK_THROWS_AS((void)cam::estimate_homography(collinear, square),
                  DegenerateInputError);

  const std::vector<Eigen::Vector2d> three = {{0, 0}, {1, 0}, {1, 1}};
  CHECK_THROWS_AS((void)cam::estimate_homography(three, three),
                  DegenerateInputError);
}

}  // TEST_SUITE
