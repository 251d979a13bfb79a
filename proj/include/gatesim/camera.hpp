#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

#include "gatesim/error.hpp"
#include "gatesim/geometry.hpp"

#include "json.hpp"

namespace gatesim::cam {

/// Pinhole intrinsics, pixels.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
};

/// Brown-Conrady lens distortion: radial k1, k2, k3 and tangential p1, p2.
struct Distortion {
  double k1 = 0.0;
  double k2 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double k3 = 0.0;
};

/// Image point, pixels. May lie outside the sensor; visibility is a separate
/// check.
struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

/// Point on the normalized image plane (x = X/Z, y = Y/Z).
struct NormalizedPoint {
  double x = 0.0;
  double y = 0.0;
};

class BehindCameraError : public Error {
 public:
  BehindCameraError() : Error("point is behind the camera") {}
};

/// Calibrated camera. Construction validates the intrinsics and checks that
/// undistortion converges over a grid spanning the central region of the
/// sensor, so a constructed model is usable everywhere the library needs it.
class CameraModel {
 public:
  CameraModel(const Intrinsics& intr, const Distortion& dist);

  const Intrinsics& intrinsics() const { return intr_; }
  const Distortion& distortion() const { return dist_; }

  /// Projects a camera-frame point (mm, z forward) to pixels, applying
  /// distortion. Throws BehindCameraError for z <= 0.
  PixelPoint project(const geom::Vec3& p_cam) const;

  /// Applies the distortion polynomial on the normalized image plane.
  NormalizedPoint distort(const NormalizedPoint& p) const;

  /// Inverts distortion by fixed-point iteration (max 20 iterations, stop at
  /// a 1e-10 step). Throws NumericError if the iteration does not settle.
  NormalizedPoint undistort(const PixelPoint& px) const;

  bool contains(const PixelPoint& px) const {
    return px.u >= 0.0 && px.u < intr_.width && px.v >= 0.0 &&
           px.v < intr_.height;
  }

  nlohmann::json to_json() const;
  static CameraModel from_json(const nlohmann::json& j);

 private:
  Intrinsics intr_;
  Distortion dist_;
};

/// Default synthetic camera used by the simulation: 960x720, fx = fy = 920,
/// centred optical axis, no distortion.
CameraModel default_camera();

/// Estimates the 3x3 homography mapping src to dst via the normalized DLT.
/// Needs >= 4 correspondences with no three collinear source points; the
/// result is scaled so H(2,2) = 1. Throws DegenerateInputError when the
/// configuration does not determine a unique map.
Eigen::Matrix3d estimate_homography(std::span<const Eigen::Vector2d> src,
                                    std::span<const Eigen::Vector2d> dst);

}  // namespace gatesim::cam
