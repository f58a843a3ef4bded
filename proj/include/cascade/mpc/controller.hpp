#pragma once

#include <map>
#include <optional>

#include "cascade/mpc/builder.hpp"
#include "cascade/mpc/packet.hpp"
#include "cascade/solver/msilqr.hpp"

namespace cascade::mpc {

/// Shifts the previous solution onto a freshly built problem's layout.
/// Existing nodes stay shooting states; nodes appended beyond the previous
/// window are duplicated from the last available state and become roll-out
/// states when their phase is entered through a state jump (impact),
/// shooting states otherwise.
ocp::SolverTrajectory warm_start_shift(const BuiltProblem& prev,
                                       const ocp::SolverTrajectory& prev_traj,
                                       const BuiltProblem& next,
                                       const ReferenceTrajectory* reference = nullptr);

using ReferenceProvider =
    std::function<ReferenceTrajectory(const VectorXd& x_measured, double t_now)>;

struct MpcSettings {
  ModelSchedule schedule;
  double period = 0.03;  // MPC update interval [s]
  CostWeights weights;
  BuildOptions build;
  solver::Settings first_solve;   // to convergence
  solver::Settings step_solve;    // capped (iterations, optional wall clock)
  bool use_wall_clock = false;    // real-time cap; off for determinism

  static MpcSettings defaults(const dyn::KinematicTree& tree);
};

/// Receding-horizon loop: builds the cascaded problem at each tick, warm
/// starts from the previous solution, runs the capped solve and emits the
/// leading six-step policy packet.
class MpcController {
 public:
  MpcController(const dyn::KinematicTree& tree, const ContactSchedule& contacts,
                const ReferenceTrajectory& reference, const MpcSettings& settings);

  /// When set, the tracking reference is regenerated at every MPC step from
  /// the measured state (Raibert-style foothold anchoring).
  void set_reference_provider(ReferenceProvider provider) {
    provider_ = std::move(provider);
  }

  PolicyPacket step(const VectorXd& x_measured, double t_now);

  const solver::SolveReport& last_report() const { return last_report_; }
  const ocp::SolverTrajectory& last_trajectory() const { return memory_traj_; }
  bool first_solve_done() const { return solved_once_; }

  /// Full re-solve from scratch on the next step (used by tests).
  void reset();

 private:
  PolicyPacket extract_packet(const BuiltProblem& built,
                              const ocp::SolverTrajectory& traj,
                              const solver::BackwardPassResult& bp, bool degraded) const;

  dyn::KinematicTree tree_;
  ContactSchedule contacts_;
  ReferenceTrajectory reference_;
  MpcSettings settings_;
  ReferenceProvider provider_;

  bool solved_once_ = false;
  std::optional<BuiltProblem> memory_built_;
  ocp::SolverTrajectory memory_traj_;
  std::map<long, VectorXd> al_memory_;  // keyed by phase-end grid index
  solver::SolveReport last_report_;

  // idempotence: identical (state, time) queries return the cached packet
  VectorXd last_x_;
  double last_t_ = std::numeric_limits<double>::quiet_NaN();
  PolicyPacket last_packet_;
};

}  // namespace cascade::mpc
