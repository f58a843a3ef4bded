#pragma once

#include "cascade/dynamics/rigid_body.hpp"
#include "cascade/mpc/packet.hpp"
#include "cascade/wbc/qp.hpp"

namespace cascade::wbc {

using mpc::PolicyPacket;

struct VwbcSettings {
  double baumgarte = 10.0;
  double staleness_slack = 0.0;  // extra time beyond the window before stale
  // joint servo gains reported alongside torque (0 = pure torque commands)
  double kp = 0.0;
  double kd = 0.0;
};

/// Riccati feedback policy tau = u*_k + K_k (x - x*_k) at the packet step
/// nearest to t. No constraint handling.
VectorXd riccati_policy(const PolicyPacket& packet, const VectorXd& x_measured, double t,
                        double staleness_slack = 0.0);

/// Assembles the value-function QP at the packet step nearest to t:
/// decision z = (tau, qdd, Fc), objective from the action-value expansion
/// (quadratic in tau, measured state offset folded into the gradient),
/// equalities = contact dynamics + non-slip rows, inequalities = torque
/// bounds, unilateral and friction-pyramid rows. Rank-deficient contacts are
/// dropped and flagged in `degraded`.
QpProblem build_vwbc_qp(const PolicyPacket& packet, const VectorXd& x_measured,
                        const dyn::KinematicTree& tree, double t,
                        const VwbcSettings& settings = {});

struct WholeBodyCommand {
  VectorXd tau;
  VectorXd q_des, qd_des;  // joint servo targets from the packet
  bool fallback = false;   // QP infeasible, clamped Riccati used
  bool degraded = false;   // contacts dropped when building the QP
  int qp_iterations = 0;
  std::vector<int> active_set;
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  int packet_step = 0;
};

/// Full controller tick: build the QP, solve it warm started from the packet
/// (and optionally the previous tick's active set), fall back to clamped
/// Riccati on infeasibility.
WholeBodyCommand vwbc_command(const PolicyPacket& packet, const VectorXd& x_measured,
                              const dyn::KinematicTree& tree, double t,
                              const VwbcSettings& settings = {},
                              const std::vector<int>& previous_active = {});

}  // namespace cascade::wbc
