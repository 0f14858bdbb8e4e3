#include "depthcal/geometry.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>

#include "depthcal/error.hpp"

namespace depthcal {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

Mat3 rodrigues(const Vec3& axis_angle) {
  const double theta2 = axis_angle.squaredNorm();
  const Mat3 k = skew(axis_angle);
  if (theta2 < kSmallAngle * kSmallAngle) {
    // R = I + K + K^2/2, exact at theta = 0.
    return Mat3::Identity() + k + 0.5 * (k * k);
  }
  const double theta = std::sqrt(theta2);
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / theta2;
  return Mat3::Identity() + a * k + b * (k * k);
}

Mat3 so3_right_jacobian(const Vec3& axis_angle) {
  const double theta2 = axis_angle.squaredNorm();
  const Mat3 k = skew(axis_angle);
  if (theta2 < kSmallAngle * kSmallAngle) {
    return Mat3::Identity() - 0.5 * k + (1.0 / 6.0) * (k * k);
  }
  const double theta = std::sqrt(theta2);
  const double a = (1.0 - std::cos(theta)) / theta2;
  const double b = (theta - std::sin(theta)) / (theta2 * theta);
  return Mat3::Identity() - a * k + b * (k * k);
}

double RigidTransform::orthonormality_defect() const {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity())
                           .cwiseAbs()
                           .maxCoeff();
  const double det = std::abs(rotation.determinant() - 1.0);
  return std::max(ortho, det);
}

RigidTransform exp_correction(const PoseCorrection& p) {
  if (!p.allFinite()) {
    throw InvalidParameterError("exp_correction: non-finite correction");
  }
  const Vec3 axis_angle = p.tail<3>();
  if (axis_angle.norm() >= kPi) {
    throw InvalidParameterError(
        "exp_correction: rotation magnitude must stay below pi");
  }
  RigidTransform t;
  t.rotation = rodrigues(axis_angle);
  t.translation = p.head<3>();
  return t;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform c;
  c.rotation = a.rotation * b.rotation;
  c.translation = a.rotation * b.translation + a.translation;
  return c;
}

RigidTransform inverse(const RigidTransform& t) {
  RigidTransform inv;
  inv.rotation = t.rotation.transpose();
  inv.translation = -(inv.rotation * t.translation);
  return inv;
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

Mat36 d_transformed_point_d_correction(const RigidTransform& t0,
                                       const PoseCorrection& p,
                                       const Vec3& x) {
  // f(p) = R0 (R(theta) x + t) + t0 with t = p[0..3], theta = p[3..6].
  // d f / d t     = R0
  // d f / d theta = -R0 R(theta) [x]_x J_r(theta)
  const Vec3 axis_angle = p.tail<3>();
  Mat36 jac;
  jac.leftCols<3>() = t0.rotation;
  jac.rightCols<3>() =
      -t0.rotation * rodrigues(axis_angle) * skew(x) * so3_right_jacobian(axis_angle);
  return jac;
}

}  // namespace depthcal
