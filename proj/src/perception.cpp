#include "gatesim/perception.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

#include "gatesim/levmar.hpp"

namespace gatesim::percep {

namespace {

using Eigen::Matrix2d;
using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

// Rotation that maps the unit vector along a onto the z axis.
Matrix3d rotation_to_z_axis(const Vector3d& a) {
  const Vector3d u = a.normalized();
  Matrix3d R;
  if (1.0 + u.z() < 1e-9) {  // a points along -z
    R = Matrix3d::Identity();
    R(2, 2) = -1.0;
    R(1, 1) = -1.0;
    return R;
  }
  const double d = 1.0 / (1.0 + u.z());
  R << 1.0 - u.x() * u.x() * d, -u.x() * u.y() * d, -u.x(),
      -u.x() * u.y() * d, 1.0 - u.y() * u.y() * d, -u.y(),
      u.x(), u.y(), 1.0 - (u.x() * u.x() + u.y() * u.y()) * d;
  return R;
}

// The two rotation solutions of the planar pose problem, from the homography
// H between the zero-centred marker plane and the normalized image plane.
// This is the analytic construction of Collins & Bartoli's IPPE: the
// homography Jacobian at the marker centre determines the rotation up to a
// two-fold reflection of the out-of-plane axis.
std::array<Matrix3d, 2> planar_rotation_candidates(const Matrix3d& H) {
  const double p = H(0, 2), q = H(1, 2);  // image of the marker centre
  Matrix2d J;
  J << H(0, 0) - H(2, 0) * p, H(0, 1) - H(2, 1) * p,
      H(1, 0) - H(2, 0) * q, H(1, 1) - H(2, 1) * q;

  const Matrix3d Rv = rotation_to_z_axis(Vector3d(p, q, 1.0)).transpose();

  Matrix2d B;
  B << Rv(0, 0) - p * Rv(2, 0), Rv(0, 1) - p * Rv(2, 1),
      Rv(1, 0) - q * Rv(2, 0), Rv(1, 1) - q * Rv(2, 1);
  const double det = B(0, 0) * B(1, 1) - B(0, 1) * B(1, 0);
  if (std::abs(det) < 1e-15)
    throw DegenerateObservationError("singular centre Jacobian");
  Matrix2d Binv;
  Binv << B(1, 1), -B(0, 1), -B(1, 0), B(0, 0);
  Binv /= det;

  const Matrix2d A = Binv * J;

  // Largest singular value of A scales the in-plane block of the rotation.
  const double ata00 = A(0, 0) * A(0, 0) + A(0, 1) * A(0, 1);
  const double ata01 = A(0, 0) * A(1, 0) + A(0, 1) * A(1, 1);
  const double ata11 = A(1, 0) * A(1, 0) + A(1, 1) * A(1, 1);
  const double gamma = std::sqrt(
      0.5 * (ata00 + ata11 +
             std::sqrt((ata00 - ata11) * (ata00 - ata11) + 4.0 * ata01 * ata01)));
  if (!(gamma > 1e-15))
    throw DegenerateObservationError("vanishing homography Jacobian");

  const Matrix2d Rt = A / gamma;
  const double b0 =
      std::sqrt(std::max(0.0, 1.0 - Rt(0, 0) * Rt(0, 0) - Rt(1, 0) * Rt(1, 0)));
  double b1 =
      std::sqrt(std::max(0.0, 1.0 - Rt(0, 1) * Rt(0, 1) - Rt(1, 1) * Rt(1, 1)));
  if (-(Rt(0, 0) * Rt(0, 1) + Rt(1, 0) * Rt(1, 1)) < 0.0) b1 = -b1;

  auto assemble = [&](double s0, double s1) {
    Matrix3d M;
    M << Rt(0, 0), Rt(0, 1), s1 * Rt(1, 0) - s0 * Rt(1, 1),
         Rt(1, 0), Rt(1, 1), s0 * Rt(0, 1) - s1 * Rt(0, 0),
         s0, s1, Rt(0, 0) * Rt(1, 1) - Rt(0, 1) * Rt(1, 0);
    return Matrix3d(Rv * M);
  };
  return {assemble(b0, b1), assemble(-b0, -b1)};
}

// Least-squares translation for a fixed rotation: each normalized image
// point (u, v) of object point P contributes u*(R P + t).z = (R P + t).x and
// the same for v.
Vector3d translation_for_rotation(const Matrix3d& R,
                                  std::span<const Vector2d> object_xy,
                                  std::span<const Vector2d> normalized) {
  Matrix3d AtA = Matrix3d::Zero();
  Vector3d Atb = Vector3d::Zero();
  for (size_t i = 0; i < object_xy.size(); ++i) {
    const Vector3d rp = R * Vector3d(object_xy[i].x(), object_xy[i].y(), 0.0);
    const double u = normalized[i].x(), v = normalized[i].y();
    // Rows [1, 0, -u] and [0, 1, -v], rhs u*rp.z - rp.x and v*rp.z - rp.y.
    AtA(0, 0) += 1.0;
    AtA(0, 2) += -u;
    AtA(1, 1) += 1.0;
    AtA(1, 2) += -v;
    AtA(2, 0) += -u;
    AtA(2, 1) += -v;
    AtA(2, 2) += u * u + v * v;
    const double bx = u * rp.z() - rp.x();
    const double by = v * rp.z() - rp.y();
    Atb(0) += bx;
    Atb(1) += by;
    Atb(2) += -u * bx - v * by;
  }
  return AtA.ldlt().solve(Atb);
}

Matrix3d orthonormalized(const Matrix3d& m) {
  Eigen::JacobiSVD<Matrix3d> svd(m,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Matrix3d flip = Matrix3d::Identity();
    flip(2, 2) = -1.0;
    R = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return R;
}

double reprojection_rms(const Matrix3d& R, const Vector3d& t,
                        std::span<const geom::Vec3> corners,
                        const MarkerObservation& obs,
                        const cam::CameraModel& cam) {
  double sum = 0.0;
  for (size_t i = 0; i < corners.size(); ++i) {
    const Vector3d p = R * corners[i] + t;
    if (!(p.z() > 0.0)) return std::numeric_limits<double>::infinity();
    const cam::PixelPoint px = cam.project(p);
    const double du = px.u - obs.corners[i].u;
    const double dv = px.v - obs.corners[i].v;
    sum += du * du + dv * dv;
  }
  return std::sqrt(sum / static_cast<double>(corners.size()));
}

struct Candidate {
  Matrix3d R;
  Vector3d t;
  double rms = std::numeric_limits<double>::infinity();
};

Candidate refine(const Candidate& c, std::span<const geom::Vec3> corners,
                 const MarkerObservation& obs, const cam::CameraModel& cam) {
  Eigen::VectorXd x0(6);
  x0.head<3>() =
      geom::rotation_to_rodrigues(geom::RotationMatrix::from_orthonormal(c.R))
          .v;
  x0.tail<3>() = c.t;

  auto residuals = [&](const Eigen::VectorXd& x) {
    const Matrix3d R = geom::rodrigues_to_rotation({x.head<3>()}).matrix();
    const Vector3d t = x.tail<3>();
    Eigen::VectorXd r(8);
    for (size_t i = 0; i < 4; ++i) {
      Vector3d p = R * corners[i] + t;
      if (p.z() < 1e-9) p.z() = 1e-9;
      const cam::PixelPoint px = cam.project(p);
      r(2 * i) = px.u - obs.corners[i].u;
      r(2 * i + 1) = px.v - obs.corners[i].v;
    }
    return r;
  };

  const optim::LmResult lm = optim::levenberg_marquardt(residuals, x0);
  Candidate out;
  out.R = geom::rodrigues_to_rotation({lm.x.head<3>()}).matrix();
  out.t = lm.x.tail<3>();
  return out;
}

}  // namespace

std::vector<MarkerObservation> observe_markers(
    std::span<const MarkerSpec> markers,
    const geom::RigidTransform& camera_pose_world, const cam::CameraModel& cam,
    const NoiseProfile& noise, Rng& rng, double t) {
  std::vector<MarkerObservation> out;
  const geom::RigidTransform world_from_camera = invert(camera_pose_world);

  for (const MarkerSpec& marker : markers) {
    const geom::RigidTransform cam_from_marker =
        compose(world_from_camera, marker.pose_world);

    const geom::Vec3 centre = cam_from_marker.translation;
    const geom::Vec3 normal = cam_from_marker.rotation * geom::Vec3(0, 0, 1);
    // Face visible only if it points towards the camera; the epsilon keeps
    // edge-on slivers out.
    if (normal.dot(centre) >= -1e-9 * centre.norm()) continue;

    const auto corners = marker.corners_marker();
    std::array<cam::PixelPoint, 4> projected;
    bool visible = true;
    for (size_t i = 0; i < 4 && visible; ++i) {
      const geom::Vec3 p = transform_point(cam_from_marker, corners[i]);
      if (!(p.z() > 0.0)) {
        visible = false;
        break;
      }
      projected[i] = cam.project(p);
      if (!cam.contains(projected[i])) visible = false;
    }
    if (!visible) continue;

    double shortest_side = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < 4; ++i) {
      const auto& a = projected[i];
      const auto& b = projected[(i + 1) % 4];
      shortest_side = std::min(shortest_side, std::hypot(a.u - b.u, a.v - b.v));
    }
    if (shortest_side < kMinMarkerSidePx) continue;

    if (noise.dropout_prob > 0.0 && rng.chance(noise.dropout_prob)) continue;

    MarkerObservation obs{marker.id, projected, t};
    if (noise.pixel_sigma > 0.0) {
      for (auto& px : obs.corners) {
        px.u += rng.gaussian(0.0, noise.pixel_sigma);
        px.v += rng.gaussian(0.0, noise.pixel_sigma);
      }
    }
    out.push_back(obs);
  }
  return out;
}

PoseEstimate solve_pnp(const MarkerObservation& obs, double side_mm,
                       const cam::CameraModel& cam,
                       PnpDiagnostics* diagnostics) {
  for (size_t i = 0; i < 4; ++i) {
    for (size_t j = i + 1; j < 4; ++j) {
      if (std::hypot(obs.corners[i].u - obs.corners[j].u,
                     obs.corners[i].v - obs.corners[j].v) < 1e-6)
        throw DegenerateObservationError("duplicate corners in observation");
    }
  }

  const double h = side_mm / 2.0;
  const std::array<Vector2d, 4> object_xy = {
      Vector2d{-h, h}, Vector2d{h, h}, Vector2d{h, -h}, Vector2d{-h, -h}};
  const std::array<geom::Vec3, 4> object_3d = {
      geom::Vec3{-h, h, 0}, geom::Vec3{h, h, 0}, geom::Vec3{h, -h, 0},
      geom::Vec3{-h, -h, 0}};

  std::array<Vector2d, 4> normalized;
  for (size_t i = 0; i < 4; ++i) {
    const cam::NormalizedPoint n = cam.undistort(obs.corners[i]);
    normalized[i] = Vector2d(n.x, n.y);
  }

  Matrix3d H;
  try {
    std::vector<Vector2d> src(object_xy.begin(), object_xy.end());
    std::vector<Vector2d> dst(normalized.begin(), normalized.end());
    H = cam::estimate_homography(src, dst);
  } catch (const DegenerateInputError& e) {
    throw DegenerateObservationError(e.what());
  }

  const std::array<Matrix3d, 2> rotations = planar_rotation_candidates(H);

  Candidate best;
  double best_tilt_cos = -2.0;
  double best_init_rms = std::numeric_limits<double>::infinity();
  for (const Matrix3d& R0 : rotations) {
    Candidate c;
    c.R = orthonormalized(R0);
    c.t = translation_for_rotation(c.R, object_xy, normalized);
    if (!(c.t.z() > 0.0)) continue;  // marker behind the camera: not physical
    best_init_rms = std::min(
        best_init_rms, reprojection_rms(c.R, c.t, object_3d, obs, cam));
    c = refine(c, object_3d, obs, cam);
    c.rms = reprojection_rms(c.R, c.t, object_3d, obs, cam);
    if (!std::isfinite(c.rms)) continue;

    // Tilt of the marker normal against the line of sight; used only to
    // break exact ties between the two ambiguity candidates.
    const double tilt_cos = -c.R.col(2).dot(c.t.normalized());
    if (c.rms < best.rms - 1e-12 ||
        (std::abs(c.rms - best.rms) <= 1e-12 && tilt_cos > best_tilt_cos)) {
      best = c;
      best_tilt_cos = tilt_cos;
    }
  }

  if (!std::isfinite(best.rms))
    throw NumericError("pose refinement diverged for marker " +
                       std::to_string(obs.id));

  if (diagnostics) *diagnostics = PnpDiagnostics{best_init_rms, best.rms};

  return PoseEstimate{
      geom::RigidTransform{geom::RotationMatrix::from_orthonormal(best.R),
                           best.t, "marker" + std::to_string(obs.id),
                           "camera"},
      best.rms, obs.timestamp_s, obs.id};
}

std::optional<PoseEstimate> select_nearest(
    std::span<const PoseEstimate> estimates) {
  const PoseEstimate* best = nullptr;
  for (const auto& e : estimates) {
    if (!best) {
      best = &e;
      continue;
    }
    const double d = e.transform.translation.norm();
    const double db = best->transform.translation.norm();
    if (d < db || (d == db && e.marker_id < best->marker_id)) best = &e;
  }
  if (!best) return std::nullopt;
  return *best;
}

TrackOutput track(TrackerState state, std::optional<PoseEstimate> detection,
                  double dt, double timeout) {
  if (detection) {
    // A detection of a different marker while the tracked one is merely
    // dropping out must not retarget the controller mid-approach: bridge the
    // gap first, adopt the newcomer only once the old marker has timed out.
    const bool same_marker =
        !state.last_pose || detection->marker_id == state.last_pose->marker_id;
    if (!same_marker) {
      state.age_s += dt;
      if (state.age_s <= timeout) return {state, state.last_pose};
    }
    state.last_pose = detection;
    state.age_s = 0.0;
    return {state, detection};
  }
  state.age_s += dt;
  if (state.last_pose && state.age_s <= timeout)
    return {state, state.last_pose};
  return {state, std::nullopt};
}

}  // namespace gatesim::percep
