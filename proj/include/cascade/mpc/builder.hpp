#pragma once

#include "cascade/dynamics/srb.hpp"
#include "cascade/mpc/reference.hpp"
#include "cascade/ocp/trajectory.hpp"

namespace cascade::mpc {

/// Tracking and regularization weights. The SRB tail reuses the base-state
/// components of the whole-body weights.
struct CostWeights {
  VectorXd w_q;           // size nq
  VectorXd w_qd;          // size nq
  double w_foot_pos = 0.0;
  double w_foot_vel = 0.0;
  VectorXd r_tau;         // size num_joints
  double r_grf = 0.0;
  double interior_terminal_scale = 0.01;  // weight of per-phase terminal costs
  double final_terminal_scale = 1.0;      // weight of the horizon-end cost

  static CostWeights defaults(const dyn::KinematicTree& tree);
};

struct BuildOptions {
  double baumgarte = 10.0;
  double ground_height = 0.0;
  double reb_delta = 0.1;
  double reb_weight = 2e-3;
  double al_penalty = 50.0;
  bool srb_grf_only_when_active = true;
  double fd_step = 1e-6;
};

/// Metadata for one built phase.
struct PhaseInfo {
  double t_start = 0.0;
  double t_end = 0.0;
  bool is_srb = false;
  dyn::ContactSet contacts;          // whole-body phases
  dyn::ContactSet touchdown;         // feet newly in stance at phase end
  bool impact_at_end = false;
};

/// A multi-phase problem plus the bookkeeping the controller needs.
struct BuiltProblem {
  ocp::MultiPhaseProblem problem;
  std::vector<PhaseInfo> info;
  double t0 = 0.0;
  ModelSchedule schedule;
  int wb_steps = 0;  // total whole-body steps across phases

  /// Maps a global whole-body step index to (phase, local step).
  std::pair<int, int> wb_step(int global) const;
};

/// Cafe-style cascaded problem: whole-body phases split at every contact
/// change within T_w (KKT contact dynamics, full constraint set, tracking
/// costs, impact resets and touchdown switching constraints), followed by
/// one unconstrained SRB phase of length T_s connected through the state
/// projection. T_s = 0 builds a pure whole-body problem.
BuiltProblem build_problem(const dyn::KinematicTree& tree, const ModelSchedule& schedule,
                           const ContactSchedule& contacts, const ReferenceTrajectory& ref,
                           const VectorXd& x0, double t0, const CostWeights& weights,
                           const BuildOptions& options = {});

/// Stand-alone unconstrained SRB phase over [t_start, t_start + steps*dt]
/// (also used by the template-MPC ablation in the harness).
ocp::Phase make_srb_phase(const dyn::KinematicTree& tree, const ContactSchedule& contacts,
                          const ReferenceTrajectory& ref, const CostWeights& weights,
                          double t_start, int steps, double dt);

}  // namespace cascade::mpc
