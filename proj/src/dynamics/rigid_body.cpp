#include "cascade/dynamics/rigid_body.hpp"

#include <cmath>

#include "cascade/dynamics/euler.hpp"

namespace cascade::dyn {

namespace {

constexpr double kFdStep = 1e-6;

struct ComJacobians {
  std::vector<MatrixXd> jv;  // linear, at link CoM
  std::vector<MatrixXd> jw;  // angular
  std::vector<MatrixXd> inertia_world;
};

ComJacobians com_jacobians(const KinematicTree& tree, const VectorXd& q,
                           const FrameSet& frames) {
  ComJacobians out;
  const int nl = tree.num_links();
  out.jv.reserve(nl);
  out.jw.reserve(nl);
  out.inertia_world.reserve(nl);
  for (int l = 0; l < nl; ++l) {
    VectorXd com = link_com_world(tree, frames, l);
    out.jv.push_back(point_jacobian(tree, q, frames, l, com));
    out.jw.push_back(angular_jacobian(tree, q, frames, l));
    if (tree.planar()) {
      out.inertia_world.push_back(tree.links[l].inertia);
    } else {
      out.inertia_world.push_back(frames.rot[l] * tree.links[l].inertia *
                                  frames.rot[l].transpose());
    }
  }
  return out;
}

}  // namespace

MatrixXd mass_matrix(const KinematicTree& tree, const VectorXd& q) {
  FrameSet frames = compute_frames(tree, q);
  ComJacobians J = com_jacobians(tree, q, frames);
  MatrixXd M = MatrixXd::Zero(tree.nv(), tree.nv());
  for (int l = 0; l < tree.num_links(); ++l) {
    M.noalias() += tree.links[l].mass * J.jv[l].transpose() * J.jv[l];
    M.noalias() += J.jw[l].transpose() * J.inertia_world[l] * J.jw[l];
  }
  return 0.5 * (M + M.transpose());
}

double kinetic_energy(const KinematicTree& tree, const VectorXd& q, const VectorXd& qd) {
  return 0.5 * qd.dot(mass_matrix(tree, q) * qd);
}

VectorXd gravity_forces(const KinematicTree& tree, const VectorXd& q) {
  FrameSet frames = compute_frames(tree, q);
  VectorXd n = VectorXd::Zero(tree.nv());
  for (int l = 0; l < tree.num_links(); ++l) {
    VectorXd com = link_com_world(tree, frames, l);
    MatrixXd jv = point_jacobian(tree, q, frames, l, com);
    n.noalias() -= tree.links[l].mass * jv.transpose() * tree.gravity;
  }
  return n;
}

namespace {

// Planar recursive Newton-Euler with qdd = 0 and the gravity trick (base
// accelerated by -g): returns the full bias vector C(q,qd)qd + g(q) in one
// O(n) sweep. The planar model is the closed-loop hot path.
VectorXd bias_forces_planar_rnea(const KinematicTree& tree, const VectorXd& q,
                                 const VectorXd& qd) {
  using Eigen::Vector2d;
  const int nl = tree.num_links();
  FrameSet fr = compute_frames(tree, q);

  std::vector<double> omega(nl), alpha(nl);
  std::vector<Vector2d> origin(nl);   // point whose acceleration we track
  std::vector<Vector2d> a_origin(nl);
  std::vector<Vector2d> a_com(nl);

  for (int l = 0; l < nl; ++l) {
    const Joint& j = tree.joints[l];
    if (j.type == JointType::FloatingBasePlanar) {
      omega[l] = qd[0];
      alpha[l] = 0.0;
      origin[l] = fr.pos[l].head<2>();
      a_origin[l] = -tree.gravity.head<2>();
    } else {
      const int p = j.parent;
      origin[l] = fr.joint_pos[l].head<2>();
      const Vector2d r = origin[l] - origin[p];
      a_origin[l] = a_origin[p] + alpha[p] * perp(r) - omega[p] * omega[p] * r;
      omega[l] = omega[p] + qd[tree.joint_dof_offset(l)];
      alpha[l] = alpha[p];  // qdd = 0
    }
    const Vector2d rc = Vector2d(fr.pos[l].head<2>()) +
                        Vector2d(fr.rot[l] * tree.links[l].com) - origin[l];
    a_com[l] = a_origin[l] + alpha[l] * perp(rc) - omega[l] * omega[l] * rc;
  }

  // backward sweep: accumulate subtree force and moment about each origin
  std::vector<Vector2d> f(nl);
  std::vector<double> n_moment(nl);
  for (int l = 0; l < nl; ++l) {
    f[l] = tree.links[l].mass * a_com[l];
    const Vector2d com_w =
        Vector2d(fr.pos[l].head<2>()) + Vector2d(fr.rot[l] * tree.links[l].com);
    n_moment[l] = tree.links[l].inertia(0, 0) * alpha[l] +
                  cross2(com_w - origin[l], f[l]);
  }
  VectorXd out = VectorXd::Zero(tree.nv());
  for (int l = nl - 1; l >= 1; --l) {
    out[tree.joint_dof_offset(l)] = n_moment[l];
    const int p = tree.joints[l].parent;
    n_moment[p] += n_moment[l] + cross2(origin[l] - origin[p], f[l]);
    f[p] += f[l];
  }
  out[0] = n_moment[0];
  out.segment<2>(1) = f[0];
  return out;
}

}  // namespace

VectorXd bias_forces(const KinematicTree& tree, const VectorXd& q, const VectorXd& qd) {
  tree.check_coordinates(q);
  tree.check_coordinates(qd);
  if (tree.planar()) return bias_forces_planar_rnea(tree, q, qd);

  const int nv = tree.nv();
  // Spatial trees: velocity-product forces from dM/dq by central differences
  // of the (analytic) mass matrix. Using the same dM/dq in both the Mdot
  // term and the quadratic-form gradient keeps the power balance
  // d/dt(0.5 qd'M qd) = qd'(tau - gravity) exact irrespective of the
  // finite-difference error.
  VectorXd n = VectorXd::Zero(nv);
  if (qd.cwiseAbs().maxCoeff() > 0) {
    MatrixXd mdot = MatrixXd::Zero(nv, nv);
    VectorXd quad_grad = VectorXd::Zero(nv);
    VectorXd qp = q, qm = q;
    for (int k = 0; k < nv; ++k) {
      const double h = kFdStep * std::max(1.0, std::abs(q[k]));
      qp[k] = q[k] + h;
      qm[k] = q[k] - h;
      MatrixXd dM = (mass_matrix(tree, qp) - mass_matrix(tree, qm)) / (2 * h);
      qp[k] = q[k];
      qm[k] = q[k];
      mdot.noalias() += dM * qd[k];
      quad_grad[k] = qd.dot(dM * qd);
    }
    n = mdot * qd - 0.5 * quad_grad;
  }
  return n + gravity_forces(tree, q);
}

MatrixXd contact_jacobian(const KinematicTree& tree, const VectorXd& q,
                          const ContactSet& contacts) {
  if (static_cast<int>(contacts.active.size()) != tree.num_ees())
    throw DimensionError("contact set", tree.num_ees(),
                         static_cast<int>(contacts.active.size()));
  FrameSet frames = compute_frames(tree, q);
  const int cd = tree.contact_dim();
  MatrixXd J(cd * contacts.count(), tree.nv());
  int row = 0;
  for (int e = 0; e < tree.num_ees(); ++e) {
    if (!contacts.active[e]) continue;
    VectorXd p = ee_position(tree, frames, e);
    J.middleRows(row, cd) = point_jacobian(tree, q, frames, tree.end_effectors[e].link, p);
    row += cd;
  }
  return J;
}

VectorXd jdot_qdot(const KinematicTree& tree, const VectorXd& q, const VectorXd& qd,
                   const ContactSet& contacts) {
  const int rows = tree.contact_dim() * contacts.count();
  const double speed = qd.size() ? qd.cwiseAbs().maxCoeff() : 0.0;
  if (speed == 0.0 || rows == 0) return VectorXd::Zero(rows);
  // Jdot qd = directional derivative of J along qd, contracted with qd.
  const double h = kFdStep / std::max(1.0, speed);
  MatrixXd Jp = contact_jacobian(tree, q + h * qd, contacts);
  MatrixXd Jm = contact_jacobian(tree, q - h * qd, contacts);
  return ((Jp - Jm) / (2 * h)) * qd;
}

namespace {

// Identifies which active contacts make the stacked Jacobian row deficient:
// greedily grow the row set and blame contacts that add no rank.
std::vector<std::string> offending_contacts(const KinematicTree& tree, const MatrixXd& J,
                                            const ContactSet& contacts) {
  const int cd = tree.contact_dim();
  std::vector<std::string> bad;
  MatrixXd grown(0, J.cols());
  int row = 0;
  for (int e = 0; e < tree.num_ees(); ++e) {
    if (!contacts.active[e]) continue;
    MatrixXd trial(grown.rows() + cd, J.cols());
    trial << grown, J.middleRows(row, cd);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(trial);
    qr.setThreshold(1e-10);
    if (qr.rank() < trial.rows())
      bad.push_back(tree.end_effectors[e].name);
    else
      grown = trial;
    row += cd;
  }
  if (bad.empty()) bad.push_back("unknown");
  return bad;
}

}  // namespace

ContactDynamics kkt_contact_dynamics(const KinematicTree& tree, const VectorXd& q,
                                     const VectorXd& qd, const VectorXd& tau,
                                     const ContactSet& contacts, double baumgarte) {
  tree.check_coordinates(q);
  tree.check_coordinates(qd);
  const int nv = tree.nv();
  const MatrixXd M = mass_matrix(tree, q);
  const VectorXd n = bias_forces(tree, q, qd);
  const VectorXd rhs_dyn = tree.expand_torque(tau) - n;

  ContactDynamics out;
  const int nc = contacts.count();
  if (nc == 0) {
    out.qdd = M.llt().solve(rhs_dyn);
    out.contact_forces = VectorXd::Zero(0);
    out.residual = (M * out.qdd - rhs_dyn).cwiseAbs().maxCoeff();
    return out;
  }

  const MatrixXd J = contact_jacobian(tree, q, contacts);
  const int c = static_cast<int>(J.rows());
  {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(J.transpose());
    qr.setThreshold(1e-10);
    if (qr.rank() < c)
      throw SingularityError("contact Jacobian rank deficient in KKT dynamics",
                             offending_contacts(tree, J, contacts));
  }
  const VectorXd jdqd = jdot_qdot(tree, q, qd, contacts);

  MatrixXd kkt = MatrixXd::Zero(nv + c, nv + c);
  kkt.topLeftCorner(nv, nv) = M;
  kkt.topRightCorner(nv, c) = J.transpose();
  kkt.bottomLeftCorner(c, nv) = J;
  VectorXd rhs(nv + c);
  rhs.head(nv) = rhs_dyn;
  rhs.tail(c) = -jdqd - baumgarte * (J * qd);

  VectorXd sol = kkt.fullPivLu().solve(rhs);
  out.qdd = sol.head(nv);
  out.contact_forces = -sol.tail(c);  // unknown block is -Fc
  out.residual = (kkt * sol - rhs).cwiseAbs().maxCoeff();
  return out;
}

ImpactResult impact_map(const KinematicTree& tree, const VectorXd& q,
                        const VectorXd& qd_minus, const ContactSet& contacts_new) {
  tree.check_coordinates(q);
  tree.check_coordinates(qd_minus);
  const int nv = tree.nv();
  const int nc = contacts_new.count();
  ImpactResult out;
  if (nc == 0) {
    out.qd_plus = qd_minus;
    out.impulses = VectorXd::Zero(0);
    return out;
  }
  const MatrixXd M = mass_matrix(tree, q);
  const MatrixXd J = contact_jacobian(tree, q, contacts_new);
  const int c = static_cast<int>(J.rows());
  {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(J.transpose());
    qr.setThreshold(1e-10);
    if (qr.rank() < c)
      throw SingularityError("contact Jacobian rank deficient in impact map",
                             offending_contacts(tree, J, contacts_new));
  }

  MatrixXd kkt = MatrixXd::Zero(nv + c, nv + c);
  kkt.topLeftCorner(nv, nv) = M;
  kkt.topRightCorner(nv, c) = J.transpose();
  kkt.bottomLeftCorner(c, nv) = J;
  VectorXd rhs(nv + c);
  rhs.head(nv) = M * qd_minus;
  rhs.tail(c).setZero();

  VectorXd sol = kkt.fullPivLu().solve(rhs);
  out.qd_plus = sol.head(nv);
  out.impulses = -sol.tail(c);
  out.residual = (kkt * sol - rhs).cwiseAbs().maxCoeff();
  return out;
}

StaticsSolution gravity_compensation(const KinematicTree& tree, const VectorXd& q,
                                     const ContactSet& contacts, double tau_weight) {
  // min tau_weight*|tau|^2 + |F|^2  s.t.  B'tau + J'F = n(q, 0)
  const int nv = tree.nv();
  const int na = tree.num_joints();
  const MatrixXd J = contact_jacobian(tree, q, contacts);
  const int c = static_cast<int>(J.rows());
  MatrixXd A(nv, na + c);
  A.leftCols(na).setZero();
  A.block(nv - na, 0, na, na).setIdentity();
  A.rightCols(c) = J.transpose();
  VectorXd w(na + c);
  w.head(na).setConstant(std::sqrt(tau_weight));
  w.tail(c).setOnes();
  // weighted least-norm: z = W^-1 A' (A W^-1 A')^-1 n
  MatrixXd Aw = A * w.cwiseInverse().asDiagonal();
  VectorXd y = (Aw * Aw.transpose()).ldlt().solve(gravity_forces(tree, q));
  VectorXd z = w.cwiseInverse().cwiseAbs2().asDiagonal() * (A.transpose() * y);
  StaticsSolution out;
  out.tau = z.head(na);
  out.contact_forces = z.tail(c);
  return out;
}

}  // namespace cascade::dyn
