#include "cascade/dynamics/srb.hpp"

#include "cascade/dynamics/euler.hpp"

namespace cascade::dyn {

SrbParams SrbParams::from_tree(const KinematicTree& tree) {
  SrbParams p;
  p.mass = tree.total_mass();
  p.inertia = tree.links[0].inertia;  // body link carries the lumped inertia
  p.gravity = tree.gravity;
  p.num_legs = tree.num_ees();
  return p;
}

VectorXd SrbState::stacked() const {
  VectorXd x(theta.size() + c.size() + thetadot.size() + cdot.size());
  x << theta, c, thetadot, cdot;
  return x;
}

SrbState SrbState::from_stacked(const SrbParams& p, const VectorXd& x) {
  const int ad = p.angular_dim(), ld = p.linear_dim();
  if (x.size() != p.state_dim())
    throw DimensionError("SRB state", p.state_dim(), static_cast<int>(x.size()));
  SrbState s;
  s.theta = x.segment(0, ad);
  s.c = x.segment(ad, ld);
  s.thetadot = x.segment(ad + ld, ad);
  s.cdot = x.segment(2 * ad + ld, ld);
  return s;
}

VectorXd srb_dynamics(const SrbParams& params, const VectorXd& x, const VectorXd& forces,
                      const std::vector<VectorXd>& footholds, const ContactSet& contacts) {
  const int ld = params.linear_dim(), ad = params.angular_dim();
  if (forces.size() != params.control_dim())
    throw DimensionError("SRB forces", params.control_dim(), static_cast<int>(forces.size()));
  if (static_cast<int>(footholds.size()) != params.num_legs)
    throw DimensionError("SRB footholds", params.num_legs, static_cast<int>(footholds.size()));
  SrbState s = SrbState::from_stacked(params, x);

  VectorXd cdd = params.gravity;
  for (int j = 0; j < params.num_legs; ++j)
    if (contacts.active[j]) cdd += forces.segment(j * ld, ld) / params.mass;

  VectorXd thdd(ad);
  if (params.planar()) {
    double torque = 0;
    for (int j = 0; j < params.num_legs; ++j) {
      if (!contacts.active[j]) continue;
      Eigen::Vector2d arm = footholds[j].head<2>() - s.c.head<2>();
      torque += cross2(arm, forces.segment<2>(j * 2));
    }
    thdd[0] = torque / params.inertia(0, 0);
  } else {
    const Eigen::Vector3d theta = s.theta;
    if (near_euler_singularity(theta))
      throw SingularityError("SRB dynamics at Euler pitch singularity", {"pitch"});
    const Eigen::Matrix3d R = rot_zyx(theta);
    const Eigen::Matrix3d E = euler_rate_to_omega(theta);
    const Eigen::Matrix3d T = omega_to_euler_rate(theta);
    const Eigen::Vector3d omega = E * Eigen::Vector3d(s.thetadot);
    Eigen::Vector3d moment = Eigen::Vector3d::Zero();
    for (int j = 0; j < params.num_legs; ++j) {
      if (!contacts.active[j]) continue;
      Eigen::Vector3d arm = Eigen::Vector3d(footholds[j]) - Eigen::Vector3d(s.c);
      moment += arm.cross(Eigen::Vector3d(forces.segment<3>(j * 3)));
    }
    const Eigen::Matrix3d& I = params.inertia;
    Eigen::Vector3d omegadot =
        I.ldlt().solve(-omega.cross(I * omega) + R.transpose() * moment);
    // thetadot = T omega  =>  thetaddot = T(omegadot - Edot thetadot)
    thdd = T * (omegadot - euler_rate_matrix_dot(theta, s.thetadot) * Eigen::Vector3d(s.thetadot));
  }

  VectorXd xdot(params.state_dim());
  xdot << s.thetadot, s.cdot, thdd, cdd;
  return xdot;
}

VectorXd srb_step(const SrbParams& params, const VectorXd& x, const VectorXd& forces,
                  const std::vector<VectorXd>& footholds, const ContactSet& contacts,
                  double dt) {
  return x + srb_dynamics(params, x, forces, footholds, contacts) * dt;
}

VectorXd project_to_srb(const KinematicTree& tree, const VectorXd& x_wb) {
  const int nq = tree.nq();
  const int bd = tree.base_dof();
  if (x_wb.size() != 2 * nq)
    throw DimensionError("whole-body state", 2 * nq, static_cast<int>(x_wb.size()));
  VectorXd out(2 * bd);
  out.head(bd) = x_wb.head(bd);
  out.tail(bd) = x_wb.segment(nq, bd);
  return out;
}

}  // namespace cascade::dyn
