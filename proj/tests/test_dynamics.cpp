#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "cascade/dynamics/euler.hpp"
#include "cascade/dynamics/model_io.hpp"
#include "cascade/dynamics/rigid_body.hpp"
#include "cascade/dynamics/srb.hpp"
#include "test_util.hpp"

using namespace cascade;
using namespace cascade::dyn;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

// Single free planar body, for hand-computable cases.
KinematicTree free_body(double mass, double inertia) {
  KinematicTree tree;
  tree.name = "free_body";
  Link l;
  l.name = "body";
  l.mass = mass;
  l.com = Vector2d(0, 0);
  l.inertia = MatrixXd::Constant(1, 1, inertia);
  Joint j;
  j.type = JointType::FloatingBasePlanar;
  j.parent = -1;
  j.placement_pos = Vector2d(0, 0);
  j.placement_rot = MatrixXd::Identity(2, 2);
  tree.links.push_back(l);
  tree.joints.push_back(j);
  EndEffector ee;
  ee.name = "point";
  ee.link = 0;
  ee.offset = Vector2d(0, 0);
  tree.end_effectors.push_back(ee);
  tree.tau_lower = VectorXd::Zero(0);
  tree.tau_upper = VectorXd::Zero(0);
  tree.qj_lower = VectorXd::Zero(0);
  tree.qj_upper = VectorXd::Zero(0);
  tree.qdj_lower = VectorXd::Zero(0);
  tree.qdj_upper = VectorXd::Zero(0);
  tree.gravity = Vector2d(0, -9.81);
  tree.finalize();
  return tree;
}

// One revolute link of length `len` hanging from a floating base.
KinematicTree pendulum(double len) {
  KinematicTree tree;
  tree.name = "pendulum";
  Link base;
  base.name = "base";
  base.mass = 1.0;
  base.com = Vector2d(0, 0);
  base.inertia = MatrixXd::Constant(1, 1, 0.1);
  Joint bj;
  bj.type = JointType::FloatingBasePlanar;
  bj.parent = -1;
  bj.placement_pos = Vector2d(0, 0);
  bj.placement_rot = MatrixXd::Identity(2, 2);
  tree.links.push_back(base);
  tree.joints.push_back(bj);

  Link rod;
  rod.name = "rod";
  rod.mass = 0.5;
  rod.com = Vector2d(0, -len / 2);
  rod.inertia = MatrixXd::Constant(1, 1, 0.5 * len * len / 12);
  Joint rj;
  rj.type = JointType::Revolute;
  rj.parent = 0;
  rj.placement_pos = Vector2d(0, 0);
  rj.placement_rot = MatrixXd::Identity(2, 2);
  tree.links.push_back(rod);
  tree.joints.push_back(rj);

  EndEffector ee;
  ee.name = "tip";
  ee.link = 1;
  ee.offset = Vector2d(0, -len);
  tree.end_effectors.push_back(ee);
  tree.tau_lower = VectorXd::Constant(1, -10);
  tree.tau_upper = VectorXd::Constant(1, 10);
  tree.qj_lower = VectorXd::Constant(1, -3);
  tree.qj_upper = VectorXd::Constant(1, 3);
  tree.qdj_lower = VectorXd::Constant(1, -50);
  tree.qdj_upper = VectorXd::Constant(1, 50);
  tree.gravity = Vector2d(0, -9.81);
  tree.finalize();
  return tree;
}

// Independent kinetic-energy oracle: propagate link twists down the tree and
// sum per-link energies. Shares only compute_frames with the implementation.
double kinetic_energy_oracle(const KinematicTree& tree, const VectorXd& q,
                             const VectorXd& qd) {
  FrameSet fr = compute_frames(tree, q);
  const int nl = tree.num_links();
  double ke = 0;
  if (tree.planar()) {
    std::vector<double> omega(nl);
    std::vector<Vector2d> v_origin(nl);  // velocity of link frame origin
    for (int l = 0; l < nl; ++l) {
      const Joint& j = tree.joints[l];
      const int off = tree.joint_dof_offset(l);
      if (j.type == JointType::FloatingBasePlanar) {
        omega[l] = qd[off];
        v_origin[l] = Vector2d(qd[off + 1], qd[off + 2]);
      } else {
        const int p = j.parent;
        Vector2d r = fr.pos[l].head<2>() - fr.pos[p].head<2>();
        v_origin[l] = v_origin[p] + omega[p] * perp(r);
        omega[l] = omega[p] + qd[off];
      }
      Vector2d com_w = fr.pos[l].head<2>() + Vector2d(fr.rot[l] * tree.links[l].com);
      Vector2d v_com = v_origin[l] + omega[l] * perp(Vector2d(com_w - fr.pos[l].head<2>()));
      ke += 0.5 * tree.links[l].mass * v_com.squaredNorm() +
            0.5 * tree.links[l].inertia(0, 0) * omega[l] * omega[l];
    }
  } else {
    std::vector<Vector3d> omega(nl);
    std::vector<Vector3d> v_origin(nl);
    for (int l = 0; l < nl; ++l) {
      const Joint& j = tree.joints[l];
      const int off = tree.joint_dof_offset(l);
      if (j.type == JointType::FloatingBaseEuler) {
        Vector3d theta = q.segment<3>(off);
        omega[l] = fr.rot[l] * euler_rate_to_omega(theta) * qd.segment<3>(off);
        v_origin[l] = qd.segment<3>(off + 3);
      } else {
        const int p = j.parent;
        Vector3d r = fr.pos[l] - fr.pos[p];
        v_origin[l] = v_origin[p] + omega[p].cross(r);
        omega[l] = omega[p] + qd[off] * fr.joint_axis_world[l];
      }
      Vector3d com_w = fr.pos[l] + fr.rot[l] * tree.links[l].com;
      Vector3d v_com = v_origin[l] + omega[l].cross(Vector3d(com_w - fr.pos[l]));
      Eigen::Matrix3d iw = fr.rot[l] * tree.links[l].inertia * fr.rot[l].transpose();
      ke += 0.5 * tree.links[l].mass * v_com.squaredNorm() + 0.5 * omega[l].dot(iw * omega[l]);
    }
  }
  return ke;
}

VectorXd free_dynamics(const KinematicTree& tree, const VectorXd& q, const VectorXd& qd) {
  return mass_matrix(tree, q).llt().solve(-bias_forces(tree, q, qd));
}

// RK4 step of the unforced, contact-free dynamics.
void rk4_step(const KinematicTree& tree, VectorXd& q, VectorXd& qd, double h) {
  auto f = [&](const VectorXd& qq, const VectorXd& vv) { return free_dynamics(tree, qq, vv); };
  VectorXd k1q = qd, k1v = f(q, qd);
  VectorXd k2q = qd + 0.5 * h * k1v, k2v = f(q + 0.5 * h * k1q, qd + 0.5 * h * k1v);
  VectorXd k3q = qd + 0.5 * h * k2v, k3v = f(q + 0.5 * h * k2q, qd + 0.5 * h * k2v);
  VectorXd k4q = qd + h * k3v, k4v = f(q + h * k3q, qd + h * k3v);
  q += h / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q);
  qd += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
}

}  // namespace

TEST_CASE("forward kinematics: zero configuration is a translation chain") {
  auto tree = testutil::planar_quadruped();
  VectorXd q = VectorXd::Zero(tree.nq());
  auto ee = forward_kinematics(tree, q);
  CHECK(ee[0].position.isApprox(Vector2d(0.19, -0.42), 1e-14));
  CHECK(ee[1].position.isApprox(Vector2d(-0.19, -0.42), 1e-14));
}

TEST_CASE("forward kinematics: rigid translation equivariance") {
  auto tree = testutil::planar_quadruped();
  std::mt19937 rng(7);
  VectorXd q = testutil::random_configuration(rng, tree);
  auto before = forward_kinematics(tree, q);
  q[1] += 0.5;
  auto after = forward_kinematics(tree, q);
  for (int e = 0; e < tree.num_ees(); ++e) {
    Vector2d shift = after[e].position - before[e].position;
    CHECK(shift.isApprox(Vector2d(0.5, 0.0), 1e-12));
  }
}

TEST_CASE("forward kinematics: single revolute joint at pi/2") {
  auto tree = pendulum(1.0);
  VectorXd q = VectorXd::Zero(4);
  q[3] = M_PI / 2;
  auto ee = forward_kinematics(tree, q);
  CHECK(ee[0].position.isApprox(Vector2d(1.0, 0.0), 1e-12));
}

TEST_CASE("mass matrix: decoupled free body") {
  auto tree = free_body(3.0, 0.2);
  VectorXd q = VectorXd::Zero(3);
  MatrixXd M = mass_matrix(tree, q);
  CHECK(M.isApprox(Vector3d(0.2, 3.0, 3.0).asDiagonal().toDenseMatrix(), 1e-14));
}

TEST_CASE("mass matrix: symmetric positive definite on random states") {
  std::mt19937 rng(11);
  for (auto tree : {testutil::planar_quadruped(), testutil::quadruped3d()}) {
    for (int trial = 0; trial < 20; ++trial) {
      VectorXd q = testutil::random_configuration(rng, tree);
      MatrixXd M = mass_matrix(tree, q);
      CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-12);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
      CHECK(es.eigenvalues().minCoeff() > 0);
    }
  }
}

TEST_CASE("mass matrix: kinetic energy matches twist-propagation oracle") {
  std::mt19937 rng(13);
  for (auto tree : {testutil::planar_quadruped(), testutil::quadruped3d()}) {
    for (int trial = 0; trial < 100; ++trial) {
      VectorXd q = testutil::random_configuration(rng, tree);
      VectorXd qd = testutil::random_vec(rng, tree.nv(), 2.0);
      double ke = kinetic_energy(tree, q, qd);
      double oracle = kinetic_energy_oracle(tree, q, qd);
      CHECK(std::abs(ke - oracle) <= 1e-10 * std::max(1.0, std::abs(oracle)));
    }
  }
}

TEST_CASE("bias forces: zero motion, zero gravity") {
  auto tree = testutil::planar_quadruped();
  tree.gravity = Vector2d(0, 0);
  std::mt19937 rng(17);
  VectorXd q = testutil::random_configuration(rng, tree);
  VectorXd n = bias_forces(tree, q, VectorXd::Zero(tree.nv()));
  CHECK(n.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("bias forces: free body statics and fall") {
  auto tree = free_body(3.0, 0.2);
  VectorXd q = VectorXd::Zero(3);
  VectorXd n = bias_forces(tree, q, VectorXd::Zero(3));
  CHECK(std::abs(n[0]) < 1e-12);
  CHECK(std::abs(n[1]) < 1e-12);
  CHECK(std::abs(std::abs(n[2]) - 3.0 * 9.81) < 1e-10);  // vertical weight only
  VectorXd qdd = free_dynamics(tree, q, VectorXd::Zero(3));
  CHECK(qdd.isApprox(Vector3d(0, 0, -9.81), 1e-12));  // sign: the body falls
}

TEST_CASE("bias forces: energy rate along unforced dynamics") {
  std::mt19937 rng(19);
  auto tree = testutil::planar_quadruped();
  for (int trial = 0; trial < 3; ++trial) {
    VectorXd q = testutil::random_configuration(rng, tree);
    VectorXd qd = testutil::random_vec(rng, tree.nv(), 1.0);
    // fine-step integration, then compare dKE/dt with gravity power
    const double h = 1e-5;
    VectorXd qa = q, va = qd, qb = q, vb = qd;
    rk4_step(tree, qb, vb, h);
    double ke_a = kinetic_energy(tree, qa, va);
    double ke_b = kinetic_energy(tree, qb, vb);
    VectorXd qm = q, vm = qd;
    rk4_step(tree, qm, vm, h / 2);
    double rate = (ke_b - ke_a) / h;
    double power = -vm.dot(gravity_forces(tree, qm));
    CHECK(std::abs(rate - power) <= 1e-6 * std::max(1.0, std::abs(power)));
  }
}

TEST_CASE("contact jacobian: matches finite differences of forward kinematics") {
  std::mt19937 rng(23);
  for (auto tree : {testutil::planar_quadruped(), testutil::quadruped3d()}) {
    ContactSet all = ContactSet::all(tree.num_ees());
    const int cd = tree.contact_dim();
    for (int trial = 0; trial < 25; ++trial) {
      VectorXd q = testutil::random_configuration(rng, tree);
      MatrixXd J = contact_jacobian(tree, q, all);
      const double h = 1e-6;
      for (int k = 0; k < tree.nq(); ++k) {
        VectorXd qp = q, qm = q;
        qp[k] += h;
        qm[k] -= h;
        auto fp = forward_kinematics(tree, qp);
        auto fm = forward_kinematics(tree, qm);
        int row = 0;
        for (int e = 0; e < tree.num_ees(); ++e) {
          VectorXd col = (fp[e].position - fm[e].position) / (2 * h);
          CHECK((J.block(row, k, cd, 1) - col).cwiseAbs().maxCoeff() < 1e-6);
          row += cd;
        }
      }
    }
  }
}

TEST_CASE("jdot qdot: zero velocity gives zero") {
  auto tree = testutil::planar_quadruped();
  std::mt19937 rng(29);
  VectorXd q = testutil::random_configuration(rng, tree);
  VectorXd v = jdot_qdot(tree, q, VectorXd::Zero(tree.nv()), ContactSet::all(2));
  CHECK(v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("jdot qdot: matches time difference of J*qd along fixed-qd path") {
  std::mt19937 rng(31);
  for (auto tree : {testutil::planar_quadruped(), testutil::quadruped3d()}) {
    ContactSet all = ContactSet::all(tree.num_ees());
    for (int trial = 0; trial < 10; ++trial) {
      VectorXd q = testutil::random_configuration(rng, tree);
      VectorXd qd = testutil::random_vec(rng, tree.nv(), 1.0);
      VectorXd jj = jdot_qdot(tree, q, qd, all);
      const double h = 1e-5;
      VectorXd vp = contact_jacobian(tree, q + h * qd, all) * qd;
      VectorXd vm = contact_jacobian(tree, q - h * qd, all) * qd;
      VectorXd fd = (vp - vm) / (2 * h);
      double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
      CHECK((jj - fd).cwiseAbs().maxCoeff() / scale < 1e-4);
    }
  }
}

TEST_CASE("kkt dynamics: standing robot with gravity compensation") {
  auto tree = testutil::planar_quadruped();
  VectorXd q(7);
  q << 0, 0, 0.2926, 0.8, -1.6, 0.8, -1.6;
  ContactSet both = ContactSet::all(2);
  auto statics = gravity_compensation(tree, q, both);
  auto dyn = kkt_contact_dynamics(tree, q, VectorXd::Zero(7), statics.tau, both);
  CHECK(dyn.qdd.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(dyn.residual < 1e-10);
  double fz = dyn.contact_forces[1] + dyn.contact_forces[3];
  CHECK(std::abs(fz - tree.total_mass() * 9.81) < 1e-8);
}

TEST_CASE("kkt dynamics: no contacts reduces to unconstrained dynamics") {
  auto tree = testutil::planar_quadruped();
  std::mt19937 rng(37);
  VectorXd q = testutil::random_configuration(rng, tree);
  VectorXd qd = testutil::random_vec(rng, tree.nv(), 1.0);
  VectorXd tau = testutil::random_vec(rng, 4, 5.0);
  auto dyn = kkt_contact_dynamics(tree, q, qd, tau, ContactSet::none(2));
  VectorXd expect =
      mass_matrix(tree, q).llt().solve(tree.expand_torque(tau) - bias_forces(tree, q, qd));
  CHECK((dyn.qdd - expect).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("kkt dynamics: point mass force balance") {
  auto tree = free_body(2.5, 0.1);
  VectorXd q = VectorXd::Zero(3), qd = VectorXd::Zero(3);
  auto dyn = kkt_contact_dynamics(tree, q, qd, VectorXd::Zero(0), ContactSet::all(1));
  CHECK(dyn.qdd.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(dyn.contact_forces.isApprox(Vector2d(0, 2.5 * 9.81), 1e-10));
  CHECK(dyn.residual < 1e-10);
}

TEST_CASE("kkt dynamics: rank-deficient contacts raise a singularity error") {
  // two end effectors at the same point of the same link
  auto tree = free_body(1.0, 0.1);
  EndEffector dup;
  dup.name = "dup";
  dup.link = 0;
  dup.offset = Vector2d(0, 0);
  tree.end_effectors.push_back(dup);
  tree.finalize();
  VectorXd q = VectorXd::Zero(3), qd = VectorXd::Zero(3);
  CHECK_THROWS_AS(kkt_contact_dynamics(tree, q, qd, VectorXd::Zero(0), ContactSet::all(2)),
                  SingularityError);
  try {
    kkt_contact_dynamics(tree, q, qd, VectorXd::Zero(0), ContactSet::all(2));
  } catch (const SingularityError& e) {
    REQUIRE(!e.culprits().empty());
    CHECK(e.culprits()[0] == "dup");
  }
}

TEST_CASE("kkt residuals below 1e-10 on random feasible states") {
  std::mt19937 rng(41);
  for (auto tree : {testutil::planar_quadruped(), testutil::quadruped3d()}) {
    ContactSet all = ContactSet::all(tree.num_ees());
    for (int trial = 0; trial < 20; ++trial) {
      VectorXd q = testutil::random_configuration(rng, tree);
      VectorXd qd = testutil::random_vec(rng, tree.nv(), 1.0);
      VectorXd tau = testutil::random_vec(rng, tree.num_joints(), 5.0);
      auto dyn = kkt_contact_dynamics(tree, q, qd, tau, all);
      CHECK(dyn.residual < 1e-10);
      auto imp = impact_map(tree, q, qd, all);
      CHECK(imp.residual < 1e-10);
    }
  }
}

TEST_CASE("impact map: falling point mass sticks") {
  auto tree = free_body(2.0, 0.1);
  VectorXd q = VectorXd::Zero(3);
  VectorXd qd(3);
  qd << 0, 0, -1.0;
  auto imp = impact_map(tree, q, qd, ContactSet::all(1));
  CHECK(imp.qd_plus.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(imp.impulses.isApprox(Vector2d(0, 2.0), 1e-12));
  auto zero = impact_map(tree, q, VectorXd::Zero(3), ContactSet::all(1));
  CHECK(zero.qd_plus.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(zero.impulses.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("impact map: never increases kinetic energy") {
  std::mt19937 rng(43);
  for (auto tree : {testutil::planar_quadruped(), testutil::quadruped3d()}) {
    for (int trial = 0; trial < 100; ++trial) {
      VectorXd q = testutil::random_configuration(rng, tree);
      VectorXd qd = testutil::random_vec(rng, tree.nv(), 2.0);
      ContactSet contacts = ContactSet::none(tree.num_ees());
      contacts.active[trial % tree.num_ees()] = 1;
      if (trial % 3 == 0) contacts.active[(trial + 1) % tree.num_ees()] = 1;
      auto imp = impact_map(tree, q, qd, contacts);
      double before = kinetic_energy(tree, q, qd);
      double after = kinetic_energy(tree, q, imp.qd_plus);
      CHECK(after <= before + 1e-10 * std::max(1.0, before));
    }
  }
}

TEST_CASE("flight: linear momentum changes only by gravity") {
  auto tree = testutil::planar_quadruped();
  std::mt19937 rng(47);
  VectorXd q = testutil::random_configuration(rng, tree);
  VectorXd qd = testutil::random_vec(rng, tree.nv(), 1.0);
  auto com_momentum = [&](const VectorXd& qq, const VectorXd& vv) {
    FrameSet fr = compute_frames(tree, qq);
    Vector2d p = Vector2d::Zero();
    for (int l = 0; l < tree.num_links(); ++l) {
      Vector2d com = link_com_world(tree, fr, l).head<2>();
      MatrixXd jv = point_jacobian(tree, qq, fr, l, VectorXd(com));
      p += tree.links[l].mass * Vector2d(jv * vv);
    }
    return p;
  };
  const double h = 1e-5;
  VectorXd qa = q, va = qd, qb = q, vb = qd;
  rk4_step(tree, qb, vb, h);
  Vector2d rate = (com_momentum(qb, vb) - com_momentum(qa, va)) / h;
  Vector2d expect = tree.total_mass() * Vector2d(0, -9.81);
  CHECK((rate - expect).cwiseAbs().maxCoeff() < 1e-6 * tree.total_mass() * 9.81);
}

TEST_CASE("euler transforms") {
  CHECK(euler_rate_to_omega(Vector3d::Zero()).isApprox(Eigen::Matrix3d::Identity(), 1e-15));
  CHECK(omega_to_euler_rate(Vector3d::Zero()).isApprox(Eigen::Matrix3d::Identity(), 1e-15));
  std::mt19937 rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    Vector3d theta = testutil::random_vec(rng, 3, 1.2);
    if (near_euler_singularity(theta, 5e-2)) continue;
    Eigen::Matrix3d prod = euler_rate_to_omega(theta) * omega_to_euler_rate(theta);
    CHECK((prod - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
  Vector3d singular(0.3, M_PI / 2 - 1e-4, -0.2);
  CHECK_THROWS_AS(omega_to_euler_rate(singular), SingularityError);
}

TEST_CASE("euler rates integrate like the rotation group") {
  std::mt19937 rng(59);
  Vector3d theta0 = testutil::random_vec(rng, 3, 0.8);
  Vector3d omega = testutil::random_vec(rng, 3, 2.0);
  const double T = 1e-3;
  const int steps = 100;
  Vector3d theta = theta0;
  for (int s = 0; s < steps; ++s) {
    // midpoint rule on thetadot = T(theta) * omega
    Vector3d k1 = omega_to_euler_rate(theta) * omega;
    Vector3d k2 = omega_to_euler_rate(Vector3d(theta + 0.5 * T / steps * k1)) * omega;
    theta += T / steps * k2;
  }
  Eigen::Matrix3d expected =
      rot_zyx(theta0) * Eigen::AngleAxisd(omega.norm() * T, omega.normalized()).toRotationMatrix();
  CHECK((rot_zyx(theta) - expected).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("srb dynamics: ballistic flight with zero force") {
  auto tree = testutil::planar_quadruped();
  SrbParams p = SrbParams::from_tree(tree);
  VectorXd x(6);
  x << 0.1, 0, 0.3, 0.5, 1.0, 2.0;
  std::vector<VectorXd> feet = {Vector2d(0.2, 0), Vector2d(-0.2, 0)};
  VectorXd xdot = srb_dynamics(p, x, VectorXd::Zero(4), feet, ContactSet::none(2));
  CHECK(xdot.head<3>().isApprox(x.tail<3>(), 1e-14));
  CHECK(xdot.tail<3>().isApprox(Vector3d(0, 0, -9.81), 1e-14));
}

TEST_CASE("srb dynamics: force through the CoM exerts no moment") {
  SrbParams p;
  p.mass = 9.0;
  p.inertia = Eigen::Matrix3d(Vector3d(0.03, 0.06, 0.08).asDiagonal());
  p.gravity = Vector3d(0, 0, -9.81);
  p.num_legs = 4;
  VectorXd x = VectorXd::Zero(12);
  x[5] = 0.3;  // cz
  std::vector<VectorXd> feet(4, Vector3d(0, 0, 0.3));  // at the CoM
  ContactSet c = ContactSet::none(4);
  c.active[0] = 1;
  VectorXd u = VectorXd::Zero(12);
  u.segment<3>(0) = Vector3d(5, -3, 40);
  VectorXd xdot = srb_dynamics(p, x, u, feet, c);
  CHECK(xdot.segment<3>(6).cwiseAbs().maxCoeff() < 1e-14);  // thetaddot
}

TEST_CASE("srb dynamics: moment bookkeeping matches cross-product oracle") {
  std::mt19937 rng(61);
  SrbParams p;
  p.mass = 9.0;
  p.inertia = Eigen::Matrix3d(Vector3d(0.03, 0.06, 0.08).asDiagonal());
  p.gravity = Vector3d(0, 0, -9.81);
  p.num_legs = 4;
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd x = testutil::random_vec(rng, 12, 0.5);
    x[1] *= 0.5;  // pitch away from singularity
    VectorXd u = testutil::random_vec(rng, 12, 30.0);
    std::vector<VectorXd> feet;
    for (int j = 0; j < 4; ++j) feet.push_back(VectorXd(testutil::random_vec(rng, 3, 0.4)));
    ContactSet c({1, 1, 0, 1});
    VectorXd xdot = srb_dynamics(p, x, u, feet, c);

    // oracle: I omegadot + omega x I omega = R' * sum (p - c) x f
    Vector3d theta = x.segment<3>(0);
    Vector3d thetadot = x.segment<3>(6);
    Eigen::Matrix3d R = rot_zyx(theta);
    Vector3d omega = euler_rate_to_omega(theta) * thetadot;
    Vector3d torque = Vector3d::Zero();
    for (int j = 0; j < 4; ++j)
      if (c.active[j])
        torque += (Vector3d(feet[j]) - Vector3d(x.segment<3>(3))).cross(Vector3d(u.segment<3>(3 * j)));
    // recover omegadot from thetaddot: omegadot = E thetaddot + Edot thetadot
    Vector3d thetaddot = xdot.segment<3>(6);
    Vector3d omegadot = euler_rate_to_omega(theta) * thetaddot +
                        euler_rate_matrix_dot(theta, thetadot) * thetadot;
    Vector3d residual = Vector3d(p.inertia * omegadot) +
                        omega.cross(Vector3d(p.inertia * omega)) - R.transpose() * torque;
    CHECK(residual.cwiseAbs().maxCoeff() < 1e-8 * std::max(1.0, torque.norm()));
  }
}

TEST_CASE("srb dynamics: singular pitch raises") {
  SrbParams p;
  p.mass = 9.0;
  p.inertia = Eigen::Matrix3d(Vector3d(0.03, 0.06, 0.08).asDiagonal());
  p.gravity = Vector3d(0, 0, -9.81);
  p.num_legs = 1;
  VectorXd x = VectorXd::Zero(12);
  x[1] = M_PI / 2;
  std::vector<VectorXd> feet = {Vector3d(0, 0, 0)};
  CHECK_THROWS_AS(srb_dynamics(p, x, VectorXd::Zero(3), feet, ContactSet::all(1)),
                  SingularityError);
}

TEST_CASE("model loader: planar quadruped loads and validates") {
  auto tree = testutil::planar_quadruped();
  CHECK(tree.nq() == 7);
  CHECK(tree.planar());
  CHECK(tree.num_ees() == 2);
  CHECK(tree.total_mass() == doctest::Approx(7.9));
}

TEST_CASE("model loader: line-precise errors") {
  std::string bad =
      "name = broken\n"
      "type = planar\n"
      "gravity = [0, -9.81]\n"
      "friction_mu = 0.4\n"
      "\n"
      "[link]\n"
      "name = torso\n"
      "mass = -1\n"
      "com = [0, 0]\n"
      "inertia = 0.05\n";
  CHECK_THROWS_AS(parse_model_text(bad, "broken.cfg"), ModelError);

  std::string bad_syntax = "name broken\n";
  try {
    parse_model_text(bad_syntax, "broken.cfg");
    FAIL("expected a parse error");
  } catch (const ModelError& e) {
    CHECK(e.line() == 1);
  }

  std::string bad_parent =
      "name = broken\ntype = planar\ngravity = [0, -9.81]\nfriction_mu = 0.4\n"
      "[link]\nname = torso\nmass = 1\ncom = [0,0]\ninertia = 0.05\n"
      "[link]\nname = leg\nparent = nosuch\nmass = 1\ncom = [0,0]\ninertia = 0.05\n";
  try {
    parse_model_text(bad_parent, "broken.cfg");
    FAIL("expected a parent error");
  } catch (const ModelError& e) {
    CHECK(e.line() == 12);
  }
}

TEST_CASE("model loader: 3d quadruped loads") {
  auto tree = testutil::quadruped3d();
  CHECK(tree.nq() == 18);
  CHECK(!tree.planar());
  CHECK(tree.num_ees() == 4);
  CHECK(tree.total_mass() == doctest::Approx(9.0));
}

TEST_CASE("bias forces: planar recursion matches the Lagrangian identity") {
  // oracle: n = Mdot qd - 0.5 d/dq (qd' M qd) + g from finite differences of
  // the analytic mass matrix
  auto tree = testutil::planar_quadruped();
  std::mt19937 rng(67);
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd q = testutil::random_configuration(rng, tree);
    VectorXd qd = testutil::random_vec(rng, tree.nv(), 2.0);
    const int nv = tree.nv();
    MatrixXd mdot = MatrixXd::Zero(nv, nv);
    VectorXd quad_grad(nv);
    for (int k = 0; k < nv; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(q[k]));
      VectorXd qp = q, qm = q;
      qp[k] += h;
      qm[k] -= h;
      MatrixXd dM = (mass_matrix(tree, qp) - mass_matrix(tree, qm)) / (2 * h);
      mdot += dM * qd[k];
      quad_grad[k] = qd.dot(dM * qd);
    }
    VectorXd oracle = mdot * qd - 0.5 * quad_grad + gravity_forces(tree, q);
    VectorXd n = bias_forces(tree, q, qd);
    double scale = std::max(1.0, oracle.cwiseAbs().maxCoeff());
    CHECK((n - oracle).cwiseAbs().maxCoeff() / scale < 1e-6);
  }
}
