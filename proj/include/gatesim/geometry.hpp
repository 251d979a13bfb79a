#pragma once

#include <Eigen/Core>

#include <string>

#include "gatesim/error.hpp"

namespace gatesim::geom {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
constexpr double kRadToDeg = 180.0 / kPi;

/// 3D point or direction. Lengths are millimetres unless stated otherwise.
using Vec3 = Eigen::Vector3d;

/// Wraps an angle in degrees to (-180, 180].
double wrap_deg(double deg);

/// Euler angles in degrees: phi = roll about x, psi = pitch about y,
/// theta = yaw about z. The rotation convention used throughout is intrinsic
/// Z-Y-X, i.e. R = Rz(theta) * Ry(psi) * Rx(phi). Ranges: phi, theta in
/// (-180, 180], psi in [-90, 90].
struct EulerAngles {
  double phi_deg = 0.0;
  double psi_deg = 0.0;
  double theta_deg = 0.0;
};

/// Axis-angle rotation, radians times unit axis. Norm is kept in [0, pi].
struct RodriguesVector {
  Vec3 v = Vec3::Zero();
};

/// Proper rotation matrix. Construction through from_matrix() verifies
/// orthonormality and det = +1 to 1e-9; products of valid rotations are
/// composed without re-checking.
class RotationMatrix {
 public:
  RotationMatrix() : m_(Eigen::Matrix3d::Identity()) {}

  /// Validates and wraps an arbitrary 3x3 matrix.
  static RotationMatrix from_matrix(const Eigen::Matrix3d& m);

  /// Trusted constructor for matrices that are rotations by construction.
  static RotationMatrix from_orthonormal(const Eigen::Matrix3d& m) {
    return RotationMatrix(m);
  }

  static RotationMatrix rot_x(double rad);
  static RotationMatrix rot_y(double rad);
  static RotationMatrix rot_z(double rad);

  const Eigen::Matrix3d& matrix() const { return m_; }

  RotationMatrix transposed() const { return RotationMatrix(m_.transpose()); }

  Vec3 operator*(const Vec3& p) const { return m_ * p; }
  RotationMatrix operator*(const RotationMatrix& o) const {
    return RotationMatrix(m_ * o.m_);
  }

  bool is_orthonormal(double tol = 1e-9) const;

 private:
  explicit RotationMatrix(Eigen::Matrix3d m) : m_(std::move(m)) {}
  Eigen::Matrix3d m_;
};

RotationMatrix euler_to_rotation(const EulerAngles& e);

/// Inverse of euler_to_rotation. At the gimbal singularity |psi| = 90 the
/// split between phi and theta is not observable; by convention phi := 0.
EulerAngles rotation_to_euler(const RotationMatrix& R);

RotationMatrix rodrigues_to_rotation(const RodriguesVector& r);

/// Inverse Rodrigues map with norm in [0, pi]. At exactly pi the axis sign is
/// not observable; the returned axis has its first nonzero component positive.
RodriguesVector rotation_to_rodrigues(const RotationMatrix& R);

/// Raised when two transforms whose frame labels do not chain are composed.
class FrameMismatchError : public Error {
 public:
  explicit FrameMismatchError(const std::string& what) : Error(what) {}
};

/// Rigid transform carrying its frame labels: maps points expressed in
/// from_frame to to_frame, p_to = R * p_from + t.
struct RigidTransform {
  RotationMatrix rotation;
  Vec3 translation = Vec3::Zero();
  std::string from_frame;
  std::string to_frame;
};

RigidTransform identity_transform(const std::string& frame);

/// a o b: requires a.from_frame == b.to_frame; maps b.from_frame to a.to_frame.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

RigidTransform invert(const RigidTransform& t);

Vec3 transform_point(const RigidTransform& t, const Vec3& p);

}  // namespace gatesim::geom
