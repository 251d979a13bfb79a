#include "gatesim/camera.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

namespace gatesim::cam {

namespace {

void validate_intrinsics(const Intrinsics& intr) {
  if (!(intr.fx > 0.0) || !(intr.fy > 0.0))
    throw ValidationError("focal lengths must be positive");
  if (intr.width <= 0 || intr.height <= 0)
    throw ValidationError("sensor size must be positive");
  if (!(intr.cx >= 0.0 && intr.cx < intr.width) ||
      !(intr.cy >= 0.0 && intr.cy < intr.height))
    throw ValidationError("optical centre must lie on the sensor");
}

bool all_finite(const Distortion& d) {
  return std::isfinite(d.k1) && std::isfinite(d.k2) && std::isfinite(d.k3) &&
         std::isfinite(d.p1) && std::isfinite(d.p2);
}

}  // namespace

CameraModel::CameraModel(const Intrinsics& intr, const Distortion& dist)
    : intr_(intr), dist_(dist) {
  validate_intrinsics(intr);
  if (!all_finite(dist)) throw ValidationError("distortion must be finite");

  // Undistortion must settle everywhere we will use it: probe a 5x5 grid
  // over the central 80% of the sensor.
  const double mu = 0.1 * intr.width, mv = 0.1 * intr.height;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      PixelPoint px{mu + (intr.width - 2 * mu) * i / 4.0,
                    mv + (intr.height - 2 * mv) * j / 4.0};
      undistort(px);  // throws on failure
    }
  }
}

NormalizedPoint CameraModel::distort(const NormalizedPoint& p) const {
  const double x = p.x, y = p.y;
  const double r2 = x * x + y * y;
  const double radial =
      1.0 + r2 * (dist_.k1 + r2 * (dist_.k2 + r2 * dist_.k3));
  const double xd =
      x * radial + 2.0 * dist_.p1 * x * y + dist_.p2 * (r2 + 2.0 * x * x);
  const double yd =
      y * radial + dist_.p1 * (r2 + 2.0 * y * y) + 2.0 * dist_.p2 * x * y;
  return NormalizedPoint{xd, yd};
}

PixelPoint CameraModel::project(const geom::Vec3& p_cam) const {
  if (!(p_cam.z() > 0.0)) throw BehindCameraError();
  const NormalizedPoint d =
      distort({p_cam.x() / p_cam.z(), p_cam.y() / p_cam.z()});
  return PixelPoint{intr_.fx * d.x + intr_.cx, intr_.fy * d.y + intr_.cy};
}

NormalizedPoint CameraModel::undistort(const PixelPoint& px) const {
  const double xd = (px.u - intr_.cx) / intr_.fx;
  const double yd = (px.v - intr_.cy) / intr_.fy;

  double x = xd, y = yd;
  for (int iter = 0; iter < 20; ++iter) {
    const double r2 = x * x + y * y;
    const double radial =
        1.0 + r2 * (dist_.k1 + r2 * (dist_.k2 + r2 * dist_.k3));
    const double dx =
        2.0 * dist_.p1 * x * y + dist_.p2 * (r2 + 2.0 * x * x);
    const double dy =
        dist_.p1 * (r2 + 2.0 * y * y) + 2.0 * dist_.p2 * x * y;
    const double xn = (xd - dx) / radial;
    const double yn = (yd - dy) / radial;
    const double step = std::hypot(xn - x, yn - y);
    x = xn;
    y = yn;
    if (step < 1e-10) return NormalizedPoint{x, y};
  }
  throw NumericError("undistortion did not converge");
}

nlohmann::json CameraModel::to_json() const {
  return nlohmann::json{{"fx", intr_.fx},      {"fy", intr_.fy},
                        {"cx", intr_.cx},      {"cy", intr_.cy},
                        {"width", intr_.width}, {"height", intr_.height},
                        {"dist", {dist_.k1, dist_.k2, dist_.p1, dist_.p2,
                                  dist_.k3}}};
}

CameraModel CameraModel::from_json(const nlohmann::json& j) {
  Intrinsics intr;
  Distortion dist;
  try {
    intr.fx = j.at("fx").get<double>();
    intr.fy = j.at("fy").get<double>();
    intr.cx = j.at("cx").get<double>();
    intr.cy = j.at("cy").get<double>();
    intr.width = j.at("width").get<int>();
    intr.height = j.at("height").get<int>();
    const auto& d = j.at("dist");
    if (d.size() != 5)
      throw ValidationError("dist must have 5 coefficients [k1,k2,p1,p2,k3]");
    dist.k1 = d[0].get<double>();
    dist.k2 = d[1].get<double>();
    dist.p1 = d[2].get<double>();
    dist.p2 = d[3].get<double>();
    dist.k3 = d[4].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad camera document: ") + e.what());
  }
  return CameraModel(intr, dist);
}

CameraModel default_camera() {
  return CameraModel({920.0, 920.0, 480.0, 360.0, 960, 720}, {});
}

Eigen::Matrix3d estimate_homography(std::span<const Eigen::Vector2d> src,
                                    std::span<const Eigen::Vector2d> dst) {
  const size_t n = src.size();
  if (n < 4 || dst.size() != n)
    throw DegenerateInputError("homography needs >= 4 correspondences");

  // Hartley normalization of both point sets.
  auto normalize = [](std::span<const Eigen::Vector2d> pts) {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& p : pts) c += p;
    c /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - c).norm();
    mean_dist /= static_cast<double>(pts.size());
    const double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    Eigen::Matrix3d T;
    T << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
    return T;
  };
  const Eigen::Matrix3d Ts = normalize(src);
  const Eigen::Matrix3d Td = normalize(dst);

  Eigen::MatrixXd A(2 * n, 9);
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d s = Ts * src[i].homogeneous();
    const Eigen::Vector3d d = Td * dst[i].homogeneous();
    A.row(2 * i) << -s.x(), -s.y(), -1, 0, 0, 0, d.x() * s.x(), d.x() * s.y(),
        d.x();
    A.row(2 * i + 1) << 0, 0, 0, -s.x(), -s.y(), -1, d.y() * s.x(),
        d.y() * s.y(), d.y();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A unique solution needs a one-dimensional null space: the second-smallest
  // singular value must be well separated from zero.
  if (sv(7) < 1e-9 * sv(0))
    throw DegenerateInputError("degenerate correspondences for homography");

  Eigen::Matrix3d Hn;
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);

  Eigen::Matrix3d H = Td.inverse() * Hn * Ts;
  if (std::abs(H(2, 2)) < 1e-14)
    throw DegenerateInputError("homography has vanishing scale");
  return H / H(2, 2);
}

}  // namespace gatesim::cam
