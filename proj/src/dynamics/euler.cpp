#include "cascade/dynamics/euler.hpp"

#include <cmath>

#include "cascade/support/error.hpp"

namespace cascade::dyn {

Eigen::Matrix3d rot_zyx(const Eigen::Vector3d& theta) {
  const double r = theta[0], p = theta[1], y = theta[2];
  return (Eigen::AngleAxisd(y, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(p, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(r, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

bool near_euler_singularity(const Eigen::Vector3d& theta, double tol) {
  const double p = theta[1];
  const double half_pi = M_PI / 2.0;
  // distance of pitch to the nearest odd multiple of pi/2
  double d = std::fmod(std::abs(p), M_PI);
  return std::abs(d - half_pi) < tol;
}

Eigen::Matrix3d euler_rate_to_omega(const Eigen::Vector3d& theta) {
  const double r = theta[0], p = theta[1];
  const double sr = std::sin(r), cr = std::cos(r);
  const double sp = std::sin(p), cp = std::cos(p);
  Eigen::Matrix3d E;
  E << 1, 0, -sp,
       0, cr, sr * cp,
       0, -sr, cr * cp;
  return E;
}

Eigen::Matrix3d omega_to_euler_rate(const Eigen::Vector3d& theta) {
  if (near_euler_singularity(theta))
    throw SingularityError("Euler-angle rate transform singular: pitch within 1e-3 of ±pi/2",
                           {"pitch"});
  const double r = theta[0], p = theta[1];
  const double sr = std::sin(r), cr = std::cos(r);
  const double cp = std::cos(p), tp = std::tan(p);
  Eigen::Matrix3d T;
  T << 1, sr * tp, cr * tp,
       0, cr, -sr,
       0, sr / cp, cr / cp;
  return T;
}

Eigen::Matrix3d euler_rate_matrix_dot(const Eigen::Vector3d& theta,
                                      const Eigen::Vector3d& thetadot) {
  const double r = theta[0], p = theta[1];
  const double rd = thetadot[0], pd = thetadot[1];
  const double sr = std::sin(r), cr = std::cos(r);
  const double sp = std::sin(p), cp = std::cos(p);
  Eigen::Matrix3d Ed;
  Ed << 0, 0, -cp * pd,
        0, -sr * rd, cr * rd * cp - sr * sp * pd,
        0, -cr * rd, -sr * rd * cp - cr * sp * pd;
  return Ed;
}

}  // namespace cascade::dyn
