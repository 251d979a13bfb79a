#pragma once

#include <Eigen/Core>

#include <vector>

#include "gatesim/camera.hpp"
#include "gatesim/geometry.hpp"

namespace gatesim::cam {

/// One view of a planar calibration target: points on the target plane (mm,
/// z = 0 implied) and where they were seen on the sensor.
struct PlanarView {
  std::vector<Eigen::Vector2d> object_xy;
  std::vector<PixelPoint> pixels;
};

class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& what) : Error(what) {}
};

class ConditioningError : public Error {
 public:
  explicit ConditioningError(const std::string& what) : Error(what) {}
};

struct CalibrationResult {
  CameraModel model;
  double rms_px = 0.0;        // root-mean-square reprojection error per point
  int lm_iterations = 0;
  std::vector<geom::RigidTransform> view_poses;  // camera<-target per view
};

/// Planar calibration: closed-form intrinsics from the homography
/// constraints, per-view extrinsics, then joint Levenberg-Marquardt over
/// intrinsics, distortion and all view poses. Needs >= 3 views with distinct
/// orientations.
CalibrationResult calibrate_planar(const std::vector<PlanarView>& views,
                                   int sensor_width, int sensor_height);

}  // namespace gatesim::cam
