#include "gatesim/calibration.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

#include "gatesim/levmar.hpp"

namespace gatesim::cam {

namespace {

// Row of the Zhang constraint system for columns i and j of H, against the
// symmetric matrix B = K^-T K^-1 packed as [B11, B12, B22, B13, B23, B33].
Eigen::Matrix<double, 6, 1> v_ij(const Eigen::Matrix3d& H, int i, int j) {
  Eigen::Matrix<double, 6, 1> v;
  v << H(0, i) * H(0, j), H(0, i) * H(1, j) + H(1, i) * H(0, j),
      H(1, i) * H(1, j), H(2, i) * H(0, j) + H(0, i) * H(2, j),
      H(2, i) * H(1, j) + H(1, i) * H(2, j), H(2, i) * H(2, j);
  return v;
}

struct ViewPose {
  geom::RodriguesVector rvec;
  geom::Vec3 tvec;
};

// Extrinsics of one view from its homography and the camera matrix.
ViewPose extrinsics_from_homography(const Eigen::Matrix3d& H,
                                    const Eigen::Matrix3d& K) {
  const Eigen::Matrix3d Kinv = K.inverse();
  Eigen::Vector3d h1 = Kinv * H.col(0);
  Eigen::Vector3d h2 = Kinv * H.col(1);
  Eigen::Vector3d h3 = Kinv * H.col(2);
  const double scale = 2.0 / (h1.norm() + h2.norm());
  h1 *= scale;
  h2 *= scale;
  h3 *= scale;
  if (h3.z() < 0.0) {  // target must be in front of the camera
    h1 = -h1;
    h2 = -h2;
    h3 = -h3;
  }
  Eigen::Matrix3d R0;
  R0.col(0) = h1;
  R0.col(1) = h2;
  R0.col(2) = h1.cross(h2);
  // Nearest rotation in the Frobenius sense.
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      R0, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    R = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return ViewPose{
      geom::rotation_to_rodrigues(geom::RotationMatrix::from_orthonormal(R)),
      h3};
}

PixelPoint project_raw(const Intrinsics& intr, const Distortion& dist,
                       const Eigen::Matrix3d& R, const geom::Vec3& t,
                       const Eigen::Vector2d& obj) {
  const geom::Vec3 p = R * geom::Vec3(obj.x(), obj.y(), 0.0) + t;
  const double x = p.x() / p.z(), y = p.y() / p.z();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (dist.k1 + r2 * (dist.k2 + r2 * dist.k3));
  const double xd = x * radial + 2.0 * dist.p1 * x * y + dist.p2 * (r2 + 2.0 * x * x);
  const double yd = y * radial + dist.p1 * (r2 + 2.0 * y * y) + 2.0 * dist.p2 * x * y;
  return PixelPoint{intr.fx * xd + intr.cx, intr.fy * yd + intr.cy};
}

}  // namespace

CalibrationResult calibrate_planar(const std::vector<PlanarView>& views,
                                   int sensor_width, int sensor_height) {
  if (views.size() < 3)
    throw InsufficientDataError("planar calibration needs >= 3 views, got " +
                                std::to_string(views.size()));
  size_t total_points = 0;
  for (const auto& v : views) {
    if (v.object_xy.size() != v.pixels.size() || v.object_xy.size() < 4)
      throw InsufficientDataError(
          "each view needs >= 4 object/pixel correspondences");
    total_points += v.object_xy.size();
  }

  // Per-view homographies, pixels from target plane.
  std::vector<Eigen::Matrix3d> homographies;
  homographies.reserve(views.size());
  for (const auto& v : views) {
    std::vector<Eigen::Vector2d> px;
    px.reserve(v.pixels.size());
    for (const auto& p : v.pixels) px.emplace_back(p.u, p.v);
    homographies.push_back(estimate_homography(v.object_xy, px));
  }

  // Closed-form intrinsics (Zhang): stack the two constraints per view and
  // take the null vector of V.
  Eigen::MatrixXd V(2 * views.size(), 6);
  for (size_t i = 0; i < views.size(); ++i) {
    const Eigen::Matrix3d& H = homographies[i];
    V.row(2 * i) = v_ij(H, 0, 1).transpose();
    V.row(2 * i + 1) = (v_ij(H, 0, 0) - v_ij(H, 1, 1)).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(V, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(4) < 1e-10 * sv(0))
    throw ConditioningError(
        "view orientations are too similar to determine the intrinsics");
  const Eigen::VectorXd b = svd.matrixV().col(5);
  const double B11 = b(0), B12 = b(1), B22 = b(2), B13 = b(3), B23 = b(4),
               B33 = b(5);

  const double denom = B11 * B22 - B12 * B12;
  const double v0 = (B12 * B13 - B11 * B23) / denom;
  const double lambda = B33 - (B13 * B13 + v0 * (B12 * B13 - B11 * B23)) / B11;
  if (!(lambda / B11 > 0.0) || !(lambda * B11 / denom > 0.0))
    throw ConditioningError("closed-form intrinsics are not positive");
  const double alpha = std::sqrt(lambda / B11);
  const double beta = std::sqrt(lambda * B11 / denom);
  const double gamma = -B12 * alpha * alpha * beta / lambda;
  const double u0 = gamma * v0 / beta - B13 * alpha * alpha / lambda;

  Eigen::Matrix3d K;
  K << alpha, gamma, u0, 0, beta, v0, 0, 0, 1;

  std::vector<ViewPose> poses;
  poses.reserve(views.size());
  for (const auto& H : homographies)
    poses.push_back(extrinsics_from_homography(H, K));

  // Joint refinement: [fx, fy, cx, cy, k1, k2, p1, p2, k3] + 6 per view.
  const size_t nv = views.size();
  Eigen::VectorXd x0(9 + 6 * nv);
  x0 << alpha, beta, u0, v0, 0, 0, 0, 0, 0, Eigen::VectorXd::Zero(6 * nv);
  for (size_t i = 0; i < nv; ++i) {
    x0.segment<3>(9 + 6 * i) = poses[i].rvec.v;
    x0.segment<3>(9 + 6 * i + 3) = poses[i].tvec;
  }

  auto residuals = [&](const Eigen::VectorXd& x) {
    Intrinsics intr{x(0), x(1), x(2), x(3), sensor_width, sensor_height};
    Distortion dist{x(4), x(5), x(6), x(7), x(8)};
    Eigen::VectorXd r(2 * total_points);
    size_t row = 0;
    for (size_t i = 0; i < nv; ++i) {
      const Eigen::Matrix3d R =
          geom::rodrigues_to_rotation({x.segment<3>(9 + 6 * i)}).matrix();
      const geom::Vec3 t = x.segment<3>(9 + 6 * i + 3);
      for (size_t k = 0; k < views[i].object_xy.size(); ++k) {
        geom::Vec3 p = R * geom::Vec3(views[i].object_xy[k].x(),
                                      views[i].object_xy[k].y(), 0.0) +
                       t;
        if (p.z() < 1e-9) p.z() = 1e-9;  // keep the residual finite
        const PixelPoint proj = project_raw(intr, dist, R, t,
                                            views[i].object_xy[k]);
        r(2 * row) = proj.u - views[i].pixels[k].u;
        r(2 * row + 1) = proj.v - views[i].pixels[k].v;
        ++row;
      }
    }
    return r;
  };

  const optim::LmResult lm = optim::levenberg_marquardt(residuals, x0);

  CalibrationResult out{
      CameraModel(
          Intrinsics{lm.x(0), lm.x(1), lm.x(2), lm.x(3), sensor_width,
                     sensor_height},
          Distortion{lm.x(4), lm.x(5), lm.x(6), lm.x(7), lm.x(8)}),
      std::sqrt(lm.cost / static_cast<double>(total_points)),
      lm.iterations,
      {}};
  out.view_poses.reserve(nv);
  for (size_t i = 0; i < nv; ++i) {
    out.view_poses.push_back(geom::RigidTransform{
        geom::rodrigues_to_rotation({lm.x.segment<3>(9 + 6 * i)}),
        lm.x.segment<3>(9 + 6 * i + 3), "target" + std::to_string(i),
        "camera"});
  }
  return out;
}

}  // namespace gatesim::cam
