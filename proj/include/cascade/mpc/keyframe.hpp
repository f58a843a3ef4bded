#pragma once

#include "cascade/mpc/builder.hpp"
#include "cascade/solver/msilqr.hpp"

namespace cascade::mpc {

struct Keyframe {
  VectorXd q, qd;
};

/// Offline whole-body TO over a fixed contact sequence, with one keyframe per
/// phase as the tracking target.
struct KeyframeTask {
  std::vector<std::pair<dyn::ContactSet, double>> sequence;
  std::vector<Keyframe> keyframes;
  VectorXd x0;
  double dt = 0.01;
  double min_body_height = -1.0;  // enforced in `min_height_phase` when >= 0
  int min_height_phase = -1;
  VectorXd w_q, w_qd, r_tau;
  double terminal_scale = 10.0;
  double ground_height = 0.0;
  double baumgarte = 10.0;
};

struct KeyframeResult {
  ocp::SolverTrajectory traj;
  ocp::MultiPhaseProblem problem;
  ReferenceTrajectory reference;
  solver::SolveReport report;
  std::vector<double> phase_end_times;
};

KeyframeResult keyframe_to(const dyn::KinematicTree& tree, const KeyframeTask& task,
                           const solver::Settings& settings);

/// Two-link planar leg inverse kinematics: joint angles (hip, knee) placing
/// the foot of `leg` at a world target given the base pose; knee bent
/// backwards. Throws when the target is out of reach.
Eigen::Vector2d planar_leg_ik(const dyn::KinematicTree& tree, int leg, double base_pitch,
                              const Eigen::Vector2d& base_pos,
                              const Eigen::Vector2d& foot_target);

struct FlipParams {
  double t_stance = 0.26;       // full stance: crouch and two-leg push
  double t_launch = 0.26;       // hind-leg rear-up finishes the push
  double t_flight = 0.40;       // aerial phase, rotation completes
  double tuck_fraction = 0.6;   // leading part of the flight spent tucked
  double t_land = 0.30;         // landing full stance
  double t_hop = 0.20;          // recovery hop flight
  double t_recover = 0.34;      // recovery stance
  double stand_height = 0.2926;
  double crouch_height = 0.24;
  double min_landing_height = 0.13;
  double liftoff_pitch = 1.6;   // rear-up angle at takeoff
};

/// Planar mid-air flip task: contact sequence {FS, HS, FT, FS} plus a
/// recovery hop {FT, FS}; keyframes from a constant rotation rate over the
/// launch and flight, ballistic height profile, stance joints from IK and a
/// tucked aerial posture.
KeyframeTask planar_flip_task(const dyn::KinematicTree& tree, const FlipParams& params,
                              const VectorXd& stand_joints);

/// Samples a solved trajectory into a dense tracking reference (FK for feet,
/// contact-consistent GRFs), extended by `pad` seconds of the final sample.
ReferenceTrajectory trajectory_to_reference(const dyn::KinematicTree& tree,
                                            const ocp::MultiPhaseProblem& problem,
                                            const ocp::SolverTrajectory& traj,
                                            const std::vector<dyn::ContactSet>& modes,
                                            double t0, double dt, double pad,
                                            double baumgarte = 10.0);

}  // namespace cascade::mpc
