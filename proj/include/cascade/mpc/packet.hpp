#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cascade/dynamics/tree.hpp"
#include "cascade/support/error.hpp"

namespace cascade::mpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// One step of the controller handoff window: nominal state/control, contact
/// forces and status, the action-value expansion blocks and the feedback
/// gain. The control u already contains the solver's feedforward update, so
/// Qu is the expansion gradient about that policy (zero at convergence).
struct PacketStep {
  double time = 0.0;
  VectorXd x;               // stacked (q, qd)
  VectorXd u;               // feedforward torques
  VectorXd contact_forces;  // stacked over active contacts
  dyn::ContactSet contacts;
  VectorXd Qu;
  MatrixXd Quu;
  MatrixXd Qux;
  MatrixXd K;
};

/// The MPC -> whole-body-controller handoff: a short window of optimized
/// steps published at the MPC rate and consumed at the controller rate.
struct PolicyPacket {
  static constexpr int kWindow = 6;

  std::vector<PacketStep> steps;
  double dt = 0.0;         // spacing of the window
  double emit_time = 0.0;  // time of the first step
  bool degraded = false;   // solver returned best-so-far, not converged

  bool empty() const { return steps.empty(); }
  double end_time() const { return empty() ? 0.0 : steps.back().time; }

  /// Index of the step closest to query time t. Throws StalenessError when t
  /// lies beyond the window end by more than `slack`.
  int nearest_step(double t, double slack = 0.0) const {
    if (empty()) throw Error("empty policy packet");
    if (t > end_time() + slack) throw StalenessError(t, end_time());
    int k = static_cast<int>(std::lround((t - steps.front().time) / dt));
    return std::clamp(k, 0, static_cast<int>(steps.size()) - 1);
  }
};

}  // namespace cascade::mpc
