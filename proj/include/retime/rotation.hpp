#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "retime/common.hpp"

namespace retime {

// Recovers a rotation matrix from the continuous 6D representation (the
// first two columns of R, stacked) by Gram-Schmidt: normalize the first
// subvector, project it out of the second and normalize, complete with the
// cross product. Scale-invariant by construction.
inline Eigen::Matrix3d rot6d_to_matrix(const Vector6d& v) {
  const Eigen::Vector3d a1 = v.head<3>();
  const Eigen::Vector3d a2 = v.tail<3>();
  const double n1 = a1.norm();
  if (n1 < 1e-12) {
    throw SingularityError("rot6d: first 3-subvector is zero");
  }
  const Eigen::Vector3d b1 = a1 / n1;
  Eigen::Vector3d b2 = a2 - b1.dot(a2) * b1;
  const double n2 = b2.norm();
  if (n2 < 1e-9 * std::max(1.0, a2.norm())) {
    throw SingularityError("rot6d: subvectors are parallel");
  }
  b2 /= n2;
  Eigen::Matrix3d r;
  r.col(0) = b1;
  r.col(1) = b2;
  r.col(2) = b1.cross(b2);
  return r;
}

// Inverse encoding: first two columns of R, stacked.
inline Vector6d matrix_to_rot6d(const Eigen::Matrix3d& r) {
  Vector6d v;
  v.head<3>() = r.col(0);
  v.tail<3>() = r.col(1);
  return v;
}

inline Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

// Geodesic angle between two rotations, in [0, pi]. Identical inputs give
// exactly zero (acos of the computed trace would round to ~1e-8).
inline double geodesic_angle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  if ((a - b).squaredNorm() == 0.0) return 0.0;
  const double c = ((a.transpose() * b).trace() - 1.0) * 0.5;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace retime
