// Rigid-body transforms, their 6-vector correction parameterization and the
// derivative of a transformed point with respect to the correction.
//
// A correction vector p = [x, y, z, theta*e] holds a translation in meters
// and a rotation in axis-angle form (radians times unit axis). Corrections
// compose on the right of an initial pose: T_hat = T * delta_T(p), so they
// act in the sensor frame.
#pragma once

#include "depthcal/types.hpp"

namespace depthcal {

// 6-vector pose correction: [tx, ty, tz, rx, ry, rz], rotation axis-angle.
using PoseCorrection = Vec6;

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }

  // Largest deviation from rotation * rotation^T = I and det = +1.
  double orthonormality_defect() const;
};

// Rodrigues' rotation for an axis-angle vector. Uses the second-order
// Taylor expansion below kSmallAngle so the zero correction maps exactly
// to the identity.
Mat3 rodrigues(const Vec3& axis_angle);

constexpr double kSmallAngle = 1e-8;

// delta_T(p): rotation = rodrigues(p[3..6]), translation = p[0..3].
// Throws InvalidParameterError on non-finite input or |theta| >= pi.
RigidTransform exp_correction(const PoseCorrection& p);

// (a * b) x == a * (b * x) for all x.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

RigidTransform inverse(const RigidTransform& t);

// Rotation angle in [0, pi] between the two rotations.
double rotation_angle_between(const Mat3& a, const Mat3& b);

// Jacobian of (t0 * exp_correction(p)) x with respect to the six components
// of p. Columns 0..2 differentiate the translation, columns 3..5 the
// axis-angle rotation.
Mat36 d_transformed_point_d_correction(const RigidTransform& t0,
                                       const PoseCorrection& p, const Vec3& x);

// Right Jacobian of SO(3): exp((theta + d)^) ~= exp(theta^) exp((J_r d)^).
Mat3 so3_right_jacobian(const Vec3& axis_angle);

// Skew-symmetric matrix [v]_x with [v]_x w = v x w.
Mat3 skew(const Vec3& v);

}  // namespace depthcal
