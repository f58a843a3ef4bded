#include "cascade/wbc/vwbc.hpp"

namespace cascade::wbc {

using dyn::ContactSet;
using dyn::KinematicTree;

VectorXd riccati_policy(const PolicyPacket& packet, const VectorXd& x_measured, double t,
                        double staleness_slack) {
  const int k = packet.nearest_step(t, staleness_slack);
  const mpc::PacketStep& step = packet.steps[k];
  return step.u + step.K * (x_measured - step.x);
}

namespace {

// Largest subset of the active contacts whose stacked Jacobian keeps full
// row rank, grown greedily in end-effector order.
ContactSet independent_contacts(const KinematicTree& tree, const VectorXd& q,
                                const ContactSet& contacts, bool& dropped) {
  dropped = false;
  if (contacts.count() == 0) return contacts;
  ContactSet kept = ContactSet::none(tree.num_ees());
  MatrixXd grown(0, tree.nv());
  for (int e = 0; e < tree.num_ees(); ++e) {
    if (!contacts.active[e]) continue;
    ContactSet single = ContactSet::none(tree.num_ees());
    single.active[e] = 1;
    MatrixXd rows = dyn::contact_jacobian(tree, q, single);
    MatrixXd trial(grown.rows() + rows.rows(), tree.nv());
    trial << grown, rows;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(trial.transpose());
    qr.setThreshold(1e-10);
    if (qr.rank() == trial.rows()) {
      grown = trial;
      kept.active[e] = 1;
    } else {
      dropped = true;
    }
  }
  return kept;
}

}  // namespace

QpProblem build_vwbc_qp(const PolicyPacket& packet, const VectorXd& x_measured,
                        const KinematicTree& tree, double t,
                        const VwbcSettings& settings) {
  const int k = packet.nearest_step(t, settings.staleness_slack);
  const mpc::PacketStep& step = packet.steps[k];

  const int nv = tree.nv();
  const int na = tree.num_joints();
  const int cd = tree.contact_dim();
  const VectorXd q = x_measured.head(nv);
  const VectorXd qd = x_measured.tail(nv);

  QpProblem qp;
  ContactSet contacts = independent_contacts(tree, q, step.contacts, qp.degraded);
  const int nc = contacts.count();
  const int nf = nc * cd;

  qp.n_tau = na;
  qp.n_qdd = nv;
  qp.n_force = nf;
  const int nz = na + nv + nf;

  // objective: the action-value expansion with the measured state offset
  // fixed; quadratic in tau only
  const VectorXd dx = x_measured - step.x;
  qp.H = MatrixXd::Zero(nz, nz);
  qp.H.topLeftCorner(na, na) = step.Quu;
  qp.g = VectorXd::Zero(nz);
  qp.g.head(na) = step.Qu + step.Qux * dx - step.Quu * step.u;

  // dynamics M qdd - B'tau - Jc'Fc = -n ; non-slip Jc qdd = -(Jdot qd) - a Jc qd
  const MatrixXd M = dyn::mass_matrix(tree, q);
  const VectorXd n = dyn::bias_forces(tree, q, qd);
  const MatrixXd J = dyn::contact_jacobian(tree, q, contacts);
  const VectorXd jdqd = dyn::jdot_qdot(tree, q, qd, contacts);

  qp.Aeq = MatrixXd::Zero(nv + nf, nz);
  qp.beq = VectorXd::Zero(nv + nf);
  qp.Aeq.block(0, na, nv, nv) = M;
  qp.Aeq.block(nv - na, 0, na, na) = -MatrixXd::Identity(na, na);  // -B_tau'
  if (nf > 0) qp.Aeq.block(0, na + nv, nv, nf) = -J.transpose();
  qp.beq.head(nv) = -n;
  if (nf > 0) {
    qp.Aeq.block(nv, na, nf, nv) = J;
    qp.beq.tail(nf) = -jdqd - settings.baumgarte * (J * qd);
  }

  // inequalities: torque box, unilateral normal force, friction pyramid
  const int pyramid_rows = tree.planar() ? 2 : 4;
  const int m_ineq = 2 * na + nc * (1 + pyramid_rows);
  qp.Cin = MatrixXd::Zero(m_ineq, nz);
  qp.din = VectorXd::Zero(m_ineq);
  qp.ineq_labels.resize(m_ineq);
  int row = 0;
  for (int j = 0; j < na; ++j) {
    qp.Cin(row, j) = 1.0;
    qp.din[row] = tree.tau_lower[j];
    qp.ineq_labels[row++] = "tau_lo_" + std::to_string(j);
    qp.Cin(row, j) = -1.0;
    qp.din[row] = -tree.tau_upper[j];
    qp.ineq_labels[row++] = "tau_hi_" + std::to_string(j);
  }
  const double mu = tree.friction_mu;
  int c_idx = 0;
  for (int e = 0; e < tree.num_ees(); ++e) {
    if (!contacts.active[e]) continue;
    const int fz = na + nv + c_idx * cd + (cd - 1);  // normal component index
    qp.Cin(row, fz) = 1.0;
    qp.ineq_labels[row++] = "unilateral_" + tree.end_effectors[e].name;
    for (int axis = 0; axis < cd - 1; ++axis) {
      const int ft = na + nv + c_idx * cd + axis;
      qp.Cin(row, fz) = mu;
      qp.Cin(row, ft) = -1.0;
      qp.ineq_labels[row++] = "friction_pos_" + tree.end_effectors[e].name;
      qp.Cin(row, fz) = mu;
      qp.Cin(row, ft) = 1.0;
      qp.ineq_labels[row++] = "friction_neg_" + tree.end_effectors[e].name;
    }
    ++c_idx;
  }
  return qp;
}

WholeBodyCommand vwbc_command(const PolicyPacket& packet, const VectorXd& x_measured,
                              const KinematicTree& tree, double t,
                              const VwbcSettings& settings,
                              const std::vector<int>& previous_active) {
  WholeBodyCommand cmd;
  const int k = packet.nearest_step(t, settings.staleness_slack);
  const mpc::PacketStep& step = packet.steps[k];
  cmd.packet_step = k;

  const int nv = tree.nv();
  const int na = tree.num_joints();
  cmd.q_des = step.x.segment(tree.base_dof(), na);
  cmd.qd_des = step.x.segment(nv + tree.base_dof(), na);

  QpProblem qp = build_vwbc_qp(packet, x_measured, tree, t, settings);
  cmd.degraded = qp.degraded;

  // warm start: packet torques/forces, qdd from the packet velocity difference
  QpWarmStart warm;
  warm.z0 = VectorXd::Zero(qp.num_vars());
  warm.z0.head(na) = step.u;
  const int knext = std::min<int>(k + 1, static_cast<int>(packet.steps.size()) - 1);
  const int kprev = knext - 1;
  if (knext > kprev && packet.dt > 0) {
    warm.z0.segment(na, nv) = (packet.steps[knext].x.tail(nv) -
                               packet.steps[kprev].x.tail(nv)) /
                              packet.dt;
  }
  if (qp.n_force > 0 && step.contact_forces.size() == qp.n_force && !qp.degraded)
    warm.z0.tail(qp.n_force) = step.contact_forces;
  // seed only rows that are near-active at the predicted point; stale rows
  // would cost a drop iteration each
  for (int row : previous_active) {
    if (row < 0 || row >= qp.num_ineq()) continue;
    const double slack = qp.Cin.row(row).dot(warm.z0) - qp.din[row];
    if (slack < 1e-4 * (1.0 + std::abs(qp.din[row]))) warm.active.push_back(row);
  }

  QpSolution sol = solve_qp(qp, warm);
  cmd.qp_iterations = sol.iterations;
  if (!sol.feasible) {
    cmd.fallback = true;
    cmd.tau = riccati_policy(packet, x_measured, t, settings.staleness_slack)
                  .cwiseMax(tree.tau_lower)
                  .cwiseMin(tree.tau_upper);
    return cmd;
  }
  cmd.tau = sol.z.head(na);
  cmd.active_set = sol.active_set;
  cmd.stationarity = sol.stationarity;
  cmd.primal_feasibility = sol.primal_feasibility;
  return cmd;
}

}  // namespace cascade::wbc
