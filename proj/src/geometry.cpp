#include "gatesim/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace gatesim::geom {

double wrap_deg(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w <= -180.0) w += 360.0;
  if (w > 180.0) w -= 360.0;
  return w;
}

bool RotationMatrix::is_orthonormal(double tol) const {
  const Eigen::Matrix3d err = m_.transpose() * m_ - Eigen::Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(m_.determinant() - 1.0) <= tol;
}

RotationMatrix RotationMatrix::from_matrix(const Eigen::Matrix3d& m) {
  RotationMatrix r(m);
  if (!r.is_orthonormal())
    throw DegenerateInputError("matrix is not a proper rotation");
  return r;
}

RotationMatrix RotationMatrix::rot_x(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return RotationMatrix(m);
}

RotationMatrix RotationMatrix::rot_y(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return RotationMatrix(m);
}

RotationMatrix RotationMatrix::rot_z(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return RotationMatrix(m);
}

RotationMatrix euler_to_rotation(const EulerAngles& e) {
  return RotationMatrix::rot_z(e.theta_deg * kDegToRad) *
         RotationMatrix::rot_y(e.psi_deg * kDegToRad) *
         RotationMatrix::rot_x(e.phi_deg * kDegToRad);
}

EulerAngles rotation_to_euler(const RotationMatrix& rot) {
  const Eigen::Matrix3d& R = rot.matrix();
  EulerAngles e;
  const double sp = -R(2, 0);  // sin(psi)
  if (std::abs(sp) >= 1.0 - 1e-12) {
    // Gimbal lock: only theta -+ phi is observable, take phi = 0.
    e.psi_deg = std::copysign(90.0, sp);
    e.phi_deg = 0.0;
    e.theta_deg = wrap_deg(std::atan2(-R(0, 1), R(1, 1)) * kRadToDeg);
  } else {
    e.psi_deg = std::asin(sp) * kRadToDeg;
    e.theta_deg = wrap_deg(std::atan2(R(1, 0), R(0, 0)) * kRadToDeg);
    e.phi_deg = wrap_deg(std::atan2(R(2, 1), R(2, 2)) * kRadToDeg);
  }
  return e;
}

RotationMatrix rodrigues_to_rotation(const RodriguesVector& r) {
  const double theta = r.v.norm();
  if (theta < 1e-15) return RotationMatrix();
  const Vec3 axis = r.v / theta;
  Eigen::Matrix3d K;
  K << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  const Eigen::Matrix3d m = Eigen::Matrix3d::Identity() + std::sin(theta) * K +
                            (1.0 - std::cos(theta)) * K * K;
  return RotationMatrix::from_orthonormal(m);
}

RodriguesVector rotation_to_rodrigues(const RotationMatrix& rot) {
  const Eigen::Matrix3d& R = rot.matrix();
  const double cos_theta =
      std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(cos_theta);

  if (theta < 1e-12) return RodriguesVector{};

  if (theta < kPi - 1e-6) {
    Vec3 axis(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    axis /= 2.0 * std::sin(theta);
    return RodriguesVector{theta * axis.normalized()};
  }

  // Near pi the skew part vanishes; recover the axis from (R + I)/2 which
  // approaches the outer product v v^T.
  const Eigen::Matrix3d B = (R + Eigen::Matrix3d::Identity()) / 2.0;
  int k = 0;
  B.diagonal().maxCoeff(&k);
  Vec3 axis = B.col(k) / std::sqrt(B(k, k));
  axis.normalize();
  // Fix the residual sign with the (possibly tiny) skew component.
  const Vec3 skew(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  if (skew.dot(axis) < 0.0) axis = -axis;
  // At exactly pi the sign of the axis is arbitrary; canonicalise it.
  if (kPi - theta < 1e-12) {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-12) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return RodriguesVector{theta * axis};
}

RigidTransform identity_transform(const std::string& frame) {
  return RigidTransform{RotationMatrix(), Vec3::Zero(), frame, frame};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  if (a.from_frame != b.to_frame)
    throw FrameMismatchError("cannot compose " + a.to_frame + "<-" +
                             a.from_frame + " with " + b.to_frame + "<-" +
                             b.from_frame);
  return RigidTransform{a.rotation * b.rotation,
                        a.rotation * b.translation + a.translation,
                        b.from_frame, a.to_frame};
}

RigidTransform invert(const RigidTransform& t) {
  const RotationMatrix rt = t.rotation.transposed();
  return RigidTransform{rt, -(rt * t.translation), t.to_frame, t.from_frame};
}

Vec3 transform_point(const RigidTransform& t, const Vec3& p) {
  return t.rotation * p + t.translation;
}

}  // namespace gatesim::geom
