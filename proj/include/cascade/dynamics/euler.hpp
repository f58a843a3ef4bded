#pragma once

#include <Eigen/Dense>

namespace cascade::dyn {

// ZYX (yaw-pitch-roll) Euler angles theta = (roll, pitch, yaw):
//   R = Rz(yaw) * Ry(pitch) * Rx(roll).
// Body angular velocity relates to Euler rates via omega = E(theta) * thetadot,
// and thetadot = T(theta) * omega with T = E^{-1}. Singular at pitch = ±pi/2.

Eigen::Matrix3d rot_zyx(const Eigen::Vector3d& theta);

/// omega_body = E(theta) * thetadot.
Eigen::Matrix3d euler_rate_to_omega(const Eigen::Vector3d& theta);

/// thetadot = T(theta) * omega_body. Throws SingularityError near pitch ±pi/2.
Eigen::Matrix3d omega_to_euler_rate(const Eigen::Vector3d& theta);

/// d/dt E(theta) along thetadot.
Eigen::Matrix3d euler_rate_matrix_dot(const Eigen::Vector3d& theta,
                                      const Eigen::Vector3d& thetadot);

/// True within `tol` of the pitch singularity.
bool near_euler_singularity(const Eigen::Vector3d& theta, double tol = 1e-3);

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

/// Planar rotation in the x-z plane, CCW positive.
inline Eigen::Matrix2d rot_planar(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

/// 90-degree CCW rotation of a planar vector: velocity of a point at r
/// rotating with unit rate is perp(r).
inline Eigen::Vector2d perp(const Eigen::Vector2d& v) {
  return Eigen::Vector2d(-v.y(), v.x());
}

/// Planar cross product (torque of force f applied at arm r).
inline double cross2(const Eigen::Vector2d& r, const Eigen::Vector2d& f) {
  return r.x() * f.y() - r.y() * f.x();
}

}  // namespace cascade::dyn
