#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gatesim/camera.hpp"
#include "gatesim/geometry.hpp"
#include "gatesim/random.hpp"

namespace gatesim::percep {

/// Square marker of known size placed in the world. Corner order is fixed:
/// top-left, top-right, bottom-right, bottom-left in the marker frame, which
/// has x right, y up and z out of the marker plane towards the viewer.
struct MarkerSpec {
  int id = 0;
  double side_mm = 150.0;
  geom::RigidTransform pose_world;  // world<-marker

  std::array<geom::Vec3, 4> corners_marker() const {
    const double h = side_mm / 2.0;
    return {geom::Vec3{-h, h, 0}, geom::Vec3{h, h, 0}, geom::Vec3{h, -h, 0},
            geom::Vec3{-h, -h, 0}};
  }
};

/// Detected marker: its four projected corners in the fixed order above.
struct MarkerObservation {
  int id = 0;
  std::array<cam::PixelPoint, 4> corners;
  double timestamp_s = 0.0;
};

/// Recovered camera<-marker pose with its fit quality.
struct PoseEstimate {
  geom::RigidTransform transform;  // camera<-marker, translation z > 0
  double reprojection_rms_px = 0.0;
  double timestamp_s = 0.0;
  int marker_id = 0;
};

/// Synthetic-detector imperfections. All randomness used by the library is
/// derived from the seed through gatesim::Rng.
struct NoiseProfile {
  double pixel_sigma = 0.0;   // Gaussian noise per corner coordinate, px
  double dropout_prob = 0.0;  // chance of losing each visible marker per frame
  std::uint64_t seed = 0;
};

class DegenerateObservationError : public Error {
 public:
  explicit DegenerateObservationError(const std::string& what) : Error(what) {}
};

/// Minimum projected side length for a marker to count as detectable.
constexpr double kMinMarkerSidePx = 8.0;

/// Geometric stand-in for the image-space marker detector. A marker is
/// reported when all four corners are in front of the camera and inside the
/// sensor, the marker face points towards the camera, and its shortest
/// projected side is at least kMinMarkerSidePx. Corner noise and dropout are
/// drawn from rng in marker order.
std::vector<MarkerObservation> observe_markers(
    std::span<const MarkerSpec> markers,
    const geom::RigidTransform& camera_pose_world, const cam::CameraModel& cam,
    const NoiseProfile& noise, Rng& rng, double t);

/// Fit details of one solve, mainly for tests and tuning.
struct PnpDiagnostics {
  double init_rms_px = 0.0;   // best homography-decomposition candidate
  double final_rms_px = 0.0;  // after refinement
};

/// Recovers the camera<-marker pose from one observation: planar-homography
/// decomposition gives the two ambiguity candidates, each is refined by
/// Levenberg-Marquardt on pixel reprojection error, and the candidate with
/// the lower error wins (ties go to the smaller tilt).
PoseEstimate solve_pnp(const MarkerObservation& obs, double side_mm,
                       const cam::CameraModel& cam,
                       PnpDiagnostics* diagnostics = nullptr);

/// Estimate with the smallest translation norm; ties break to the lowest
/// marker id. Empty input gives nullopt.
std::optional<PoseEstimate> select_nearest(
    std::span<const PoseEstimate> estimates);

/// Holds the last valid pose while detections drop out. age_s counts seconds
/// since the last valid detection and is 0 exactly when the current tick
/// produced one.
struct TrackerState {
  std::optional<PoseEstimate> last_pose;
  double age_s = std::numeric_limits<double>::infinity();
};

struct TrackOutput {
  TrackerState state;
  std::optional<PoseEstimate> pose;
};

/// Passes fresh detections through and bridges gaps up to timeout seconds
/// with the stored pose; beyond that the marker counts as lost. Tracking is
/// sticky on the marker id: while the tracked marker is inside its bridging
/// window, a detection of some other marker does not retarget the output.
TrackOutput track(TrackerState state, std::optional<PoseEstimate> detection,
                  double dt, double timeout);

}  // namespace gatesim::percep
