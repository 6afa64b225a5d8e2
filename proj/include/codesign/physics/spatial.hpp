#pragma once

// 6D spatial vectors ordered [angular; linear].

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace codesign {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

// v x m for motion vectors.
inline Vector6d motion_cross(const Vector6d& v, const Vector6d& m) {
  const Eigen::Vector3d w = v.head<3>(), vl = v.tail<3>();
  const Eigen::Vector3d ma = m.head<3>(), ml = m.tail<3>();
  Vector6d out;
  out.head<3>() = w.cross(ma);
  out.tail<3>() = w.cross(ml) + vl.cross(ma);
  return out;
}

// v x* f for force vectors.
inline Vector6d force_cross(const Vector6d& v, const Vector6d& f) {
  const Eigen::Vector3d w = v.head<3>(), vl = v.tail<3>();
  const Eigen::Vector3d fa = f.head<3>(), fl = f.tail<3>();
  Vector6d out;
  out.head<3>() = w.cross(fa) + vl.cross(fl);
  out.tail<3>() = w.cross(fl);
  return out;
}

/// Coordinate transform for motion vectors from frame A to frame B, where E
/// rotates A coordinates into B coordinates and r is B's origin in A.
struct SpatialTransform {
  Eigen::Matrix3d E = Eigen::Matrix3d::Identity();
  Eigen::Vector3d r = Eigen::Vector3d::Zero();

  Vector6d apply_motion(const Vector6d& m) const {
    Vector6d out;
    out.head<3>() = E * m.head<3>();
    out.tail<3>() = E * (m.tail<3>() - r.cross(m.head<3>()));
    return out;
  }

  // X^T f: takes a force in B coordinates back to A.
  Vector6d transpose_apply_force(const Vector6d& f) const {
    Vector6d out;
    const Eigen::Vector3d fl = E.transpose() * f.tail<3>();
    out.head<3>() = E.transpose() * f.head<3>() + r.cross(fl);
    out.tail<3>() = fl;
    return out;
  }

  Matrix6d matrix() const {
    Matrix6d X = Matrix6d::Zero();
    X.topLeftCorner<3, 3>() = E;
    X.bottomRightCorner<3, 3>() = E;
    X.bottomLeftCorner<3, 3>() = -E * skew(r);
    return X;
  }
};

/// Spatial inertia about a frame origin for a body of mass m whose centre of
/// mass sits at c with rotational inertia Ic about the centre of mass.
inline Matrix6d spatial_inertia(double m, const Eigen::Vector3d& c, const Eigen::Matrix3d& Ic) {
  const Eigen::Matrix3d cx = skew(c);
  Matrix6d I;
  I.topLeftCorner<3, 3>() = Ic - m * cx * cx;
  I.topRightCorner<3, 3>() = m * cx;
  I.bottomLeftCorner<3, 3>() = -m * cx;
  I.bottomRightCorner<3, 3>() = m * Eigen::Matrix3d::Identity();
  return I;
}

// Force exerted by a 3D force f applied at point p, both in the same frame.
inline Vector6d point_force(const Eigen::Vector3d& p, const Eigen::Vector3d& f) {
  Vector6d out;
  out.head<3>() = p.cross(f);
  out.tail<3>() = f;
  return out;
}

}  // namespace codesign
